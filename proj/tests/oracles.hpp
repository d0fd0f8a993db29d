// Copyright (c) opfcert contributors
// SPDX-License-Identifier: Apache-2.0
//
// Brute-force references for the nonlinear problem the relaxation lower
// bounds. These work directly on voltage phasors and never touch the conic
// solver: a coarse grid scan followed by local refinement.

#pragma once

#include <opfcert/casefile.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <optional>
#include <vector>

namespace opfcert::test {

struct BruteForceResult {
    bool feasible_found = false;
    double best_cost = std::numeric_limits<double>::infinity();
    Eigen::VectorXcd best_voltage;
};

namespace bf_detail {

inline Complex injection(const Eigen::MatrixXcd& y, const Eigen::VectorXcd& v, int i) {
    return v[i] * std::conj((y * v)(i));
}

struct Evaluation {
    bool feasible = false;
    double cost = std::numeric_limits<double>::infinity();
    double violation = 0.0;  // worst constraint breach beyond tolerance

    /// Objective with a steep penalty, so a pattern search can slide along
    /// active generation-bound surfaces instead of jamming against them.
    double merit() const { return cost + 1e4 * violation; }
};

/// Feasibility, cost and violation of a full voltage assignment. Balance
/// equations must hold at non-generator buses within eq_tol.
inline Evaluation evaluate(const CaseModel& model, const Eigen::MatrixXcd& y,
                           const Eigen::VectorXcd& v, double eq_tol) {
    Evaluation out;
    double cost = 0.0;
    double violation = 0.0;
    auto breach = [&](double amount) { violation = std::max(violation, amount); };
    for (int i = 0; i < model.n(); ++i) {
        const Bus& bus = model.buses[i];
        const double mag = std::abs(v[i]);
        if (bus.v_fixed) {
            breach(std::abs(mag - *bus.v_fixed) - 1e-9);
        } else {
            breach(bus.v_min - mag - 1e-9);
            breach(mag - bus.v_max - 1e-9);
        }
        const Complex s_g = Complex(bus.p_demand, bus.q_demand) + injection(y, v, i);
        const Generator* gen = model.generator_at(i);
        if (gen == nullptr) {
            breach(std::abs(s_g) - eq_tol);
        } else {
            breach(gen->p_min - s_g.real() - 1e-7);
            breach(s_g.real() - gen->p_max - 1e-7);
            breach(gen->q_min - s_g.imag() - 1e-7);
            breach(s_g.imag() - gen->q_max - 1e-7);
            cost += gen->c1 * s_g.real() + gen->c0;
        }
    }
    out.cost = cost;
    out.violation = std::max(0.0, violation);
    out.feasible = out.violation <= 1e-6;
    return out;
}

}  // namespace bf_detail

/// Grid search plus pattern refinement for cases where every bus hosts a
/// generator (no equality constraints remain in voltage space). Variables
/// are the non-fixed magnitudes and the angles of buses 2..n.
inline BruteForceResult brute_force_all_gen(const CaseModel& model, int mag_points = 7,
                                            int angle_points = 15,
                                            double angle_span = 0.7) {
    const int n = model.n();
    const Eigen::MatrixXcd y = build_admittance(model);

    std::vector<int> free_mag;
    for (int i = 0; i < n; ++i) {
        if (!model.buses[i].v_fixed) free_mag.push_back(i);
    }
    const int dims = static_cast<int>(free_mag.size()) + (n - 1);

    std::vector<double> lo(dims), hi(dims), step(dims), point(dims);
    for (std::size_t d = 0; d < free_mag.size(); ++d) {
        lo[d] = model.buses[free_mag[d]].v_min;
        hi[d] = model.buses[free_mag[d]].v_max;
        step[d] = (hi[d] - lo[d]) / double(mag_points - 1);
    }
    for (int d = static_cast<int>(free_mag.size()); d < dims; ++d) {
        lo[d] = -angle_span;
        hi[d] = angle_span;
        step[d] = (hi[d] - lo[d]) / double(angle_points - 1);
    }

    auto assemble = [&](const std::vector<double>& p) {
        Eigen::VectorXcd v(n);
        std::size_t mag_slot = 0;
        for (int i = 0; i < n; ++i) {
            double mag = model.buses[i].v_fixed ? *model.buses[i].v_fixed : p[mag_slot++];
            double angle = i == 0 ? 0.0 : p[free_mag.size() + i - 1];
            v[i] = std::polar(mag, angle);
        }
        return v;
    };

    BruteForceResult best;
    if (dims == 0) {  // every magnitude pinned, single bus: one candidate point
        auto eval = bf_detail::evaluate(model, y, assemble({}), 1e-6);
        best.feasible_found = eval.feasible;
        best.best_cost = eval.cost;
        best.best_voltage = assemble({});
        return best;
    }
    std::vector<int> counts(dims);
    for (int d = 0; d < dims; ++d) {
        counts[d] = d < static_cast<int>(free_mag.size()) ? mag_points : angle_points;
    }
    long cells = 1;
    for (int c : counts) cells *= c;

    // Keep the handful of lowest-merit cells as refinement seeds; a
    // single-basin pattern search can stall short of the optimum.
    constexpr std::size_t kSeeds = 8;
    std::vector<std::pair<double, std::vector<double>>> seeds;  // (merit, point)
    for (long cell = 0; cell < cells; ++cell) {
        long rest = cell;
        for (int d = 0; d < dims; ++d) {
            point[d] = lo[d] + step[d] * double(rest % counts[d]);
            rest /= counts[d];
        }
        auto eval = bf_detail::evaluate(model, y, assemble(point), 1e-6);
        if (eval.feasible && eval.cost < best.best_cost) {
            best.feasible_found = true;
            best.best_cost = eval.cost;
            best.best_voltage = assemble(point);
        }
        seeds.emplace_back(eval.merit(), point);
        std::sort(seeds.begin(), seeds.end(),
                  [](const auto& a, const auto& b) { return a.first < b.first; });
        if (seeds.size() > kSeeds) seeds.pop_back();
    }

    // Penalized pattern search from each seed. Axis moves alone jam against
    // active generation-bound surfaces, so each sweep also tries
    // two-coordinate diagonal moves, which can slide along one such surface.
    for (const auto& [seed_merit, seed] : seeds) {
        std::vector<double> center = seed;
        double incumbent = seed_merit;
        std::vector<double> width = step;

        auto try_move = [&](const std::vector<double>& trial) {
            auto eval = bf_detail::evaluate(model, y, assemble(trial), 1e-6);
            if (eval.feasible && eval.cost < best.best_cost) {
                best.feasible_found = true;
                best.best_cost = eval.cost;
                best.best_voltage = assemble(trial);
            }
            if (eval.merit() < incumbent - 1e-14) {
                incumbent = eval.merit();
                center = trial;
                return true;
            }
            return false;
        };

        while (*std::max_element(width.begin(), width.end()) > 1e-5) {
            bool improved = false;
            for (int d = 0; d < dims; ++d) {
                for (double sign : {-1.0, 1.0}) {
                    std::vector<double> trial = center;
                    trial[d] = std::clamp(trial[d] + sign * width[d], lo[d], hi[d]);
                    improved |= try_move(trial);
                }
            }
            for (int d1 = 0; d1 < dims; ++d1) {
                for (int d2 = d1 + 1; d2 < dims; ++d2) {
                    for (double s1 : {-1.0, 1.0}) {
                        for (double s2 : {-1.0, 1.0}) {
                            std::vector<double> trial = center;
                            trial[d1] = std::clamp(trial[d1] + s1 * width[d1], lo[d1], hi[d1]);
                            trial[d2] = std::clamp(trial[d2] + s2 * width[d2], lo[d2], hi[d2]);
                            improved |= try_move(trial);
                        }
                    }
                }
            }
            if (!improved) {
                for (double& wd : width) wd *= 0.5;
            }
        }
    }
    return best;
}

/// Reference for cases with exactly one load bus: its two balance equations
/// are eliminated by Newton iteration in (magnitude, angle) at every visited
/// point, so the search coordinates are the generator-bus magnitudes and
/// angles where only box bounds can bind.
inline BruteForceResult brute_force_one_load(const CaseModel& model, int mag_points = 7,
                                             int angle_points = 21, double angle_span = 0.6) {
    const int n = model.n();
    const Eigen::MatrixXcd y = build_admittance(model);
    int load_bus = -1;
    for (int i = 0; i < n; ++i) {
        if (model.generator_at(i) == nullptr) {
            if (load_bus >= 0) throw std::invalid_argument("expected exactly one load bus");
            load_bus = i;
        }
    }
    if (load_bus < 0) throw std::invalid_argument("expected exactly one load bus");

    std::vector<int> mag_dims;  // non-fixed generator-bus magnitudes
    std::vector<int> angle_dims;
    for (int i = 0; i < n; ++i) {
        if (i == load_bus) continue;
        if (!model.buses[i].v_fixed) mag_dims.push_back(i);
        if (i != 0) angle_dims.push_back(i);
    }
    const int dims = static_cast<int>(mag_dims.size() + angle_dims.size());

    auto solve_balance = [&](const std::vector<double>& coords)
        -> std::optional<Eigen::VectorXcd> {
        Eigen::VectorXcd v(n);
        std::size_t slot = 0;
        for (int i = 0; i < n; ++i) {
            if (i == load_bus) {
                v[i] = 1.0;
                continue;
            }
            const double mag =
                model.buses[i].v_fixed ? *model.buses[i].v_fixed : coords[slot++];
            v[i] = std::polar(mag, 0.0);
        }
        for (int axis : angle_dims) {
            v[axis] = std::polar(std::abs(v[axis]), coords[slot++]);
        }
        double m = 1.0, t = 0.0;
        const Complex demand(model.buses[load_bus].p_demand, model.buses[load_bus].q_demand);
        for (int it = 0; it < 60; ++it) {
            v[load_bus] = std::polar(m, t);
            const Complex f = demand + bf_detail::injection(y, v, load_bus);
            if (std::abs(f) < 1e-12) break;
            const double h = 1e-7;
            Eigen::VectorXcd vm = v, vt = v;
            vm[load_bus] = std::polar(m + h, t);
            vt[load_bus] = std::polar(m, t + h);
            const Complex fm = (demand + bf_detail::injection(y, vm, load_bus) - f) / h;
            const Complex ft = (demand + bf_detail::injection(y, vt, load_bus) - f) / h;
            Eigen::Matrix2d jac;
            jac << fm.real(), ft.real(), fm.imag(), ft.imag();
            if (std::abs(jac.determinant()) < 1e-14) return std::nullopt;
            const Eigen::Vector2d delta = jac.inverse() * Eigen::Vector2d(f.real(), f.imag());
            m -= delta[0];
            t -= delta[1];
            if (m <= 0.0) return std::nullopt;
        }
        v[load_bus] = std::polar(m, t);
        if (std::abs(demand + bf_detail::injection(y, v, load_bus)) > 1e-9) return std::nullopt;
        return v;
    };

    BruteForceResult best;
    auto consider = [&](const std::vector<double>& coords) {
        auto v = solve_balance(coords);
        if (!v) return false;
        auto eval = bf_detail::evaluate(model, y, *v, 1e-6);
        if (eval.feasible && eval.cost < best.best_cost) {
            best.feasible_found = true;
            best.best_cost = eval.cost;
            best.best_voltage = *v;
            return true;
        }
        return false;
    };

    std::vector<double> lo(dims), hi(dims), step(dims), point(dims);
    for (std::size_t d = 0; d < mag_dims.size(); ++d) {
        lo[d] = model.buses[mag_dims[d]].v_min;
        hi[d] = model.buses[mag_dims[d]].v_max;
        step[d] = (hi[d] - lo[d]) / double(mag_points - 1);
    }
    for (std::size_t d = mag_dims.size(); d < static_cast<std::size_t>(dims); ++d) {
        lo[d] = -angle_span;
        hi[d] = angle_span;
        step[d] = 2.0 * angle_span / double(angle_points - 1);
    }
    std::vector<int> counts(dims);
    for (int d = 0; d < dims; ++d) {
        counts[d] = d < static_cast<int>(mag_dims.size()) ? mag_points : angle_points;
    }
    long cells = 1;
    for (int c : counts) cells *= c;
    std::vector<double> best_point;
    for (long cell = 0; cell < cells; ++cell) {
        long rest = cell;
        for (int d = 0; d < dims; ++d) {
            point[d] = lo[d] + step[d] * double(rest % counts[d]);
            rest /= counts[d];
        }
        if (consider(point)) best_point = point;
    }
    if (!best.feasible_found) return best;

    std::vector<double> center = best_point;
    std::vector<double> width = step;
    while (*std::max_element(width.begin(), width.end()) > 1e-5) {
        bool improved = false;
        for (int d = 0; d < dims; ++d) {
            for (double sign : {-1.0, 1.0}) {
                std::vector<double> trial = center;
                trial[d] = std::clamp(trial[d] + sign * width[d], lo[d], hi[d]);
                if (consider(trial)) {
                    center = trial;
                    improved = true;
                }
            }
        }
        if (!improved) {
            for (double& wd : width) wd *= 0.5;
        }
    }
    return best;
}

/// Dedicated reference for one generator bus feeding one load bus. The two
/// balance equations at the load bus are solved by Newton iteration in
/// (|V2|, theta2) for each gridded |V1|; the outer magnitude is then scanned
/// at successively finer resolution.
inline BruteForceResult brute_force_two_bus(const CaseModel& model) {
    const Eigen::MatrixXcd y = build_admittance(model);
    const Bus& gen_bus = model.buses[0];
    const Bus& load_bus = model.buses[1];
    const Generator* gen = model.generator_at(0);

    auto balance_solution = [&](double m1, double m2_seed, double t_seed)
        -> std::optional<Eigen::VectorXcd> {
        double m2 = m2_seed, t = t_seed;
        for (int it = 0; it < 60; ++it) {
            Eigen::VectorXcd v(2);
            v << Complex(m1, 0.0), std::polar(m2, t);
            const Complex f = Complex(load_bus.p_demand, load_bus.q_demand) +
                              bf_detail::injection(y, v, 1);
            if (std::abs(f) < 1e-12) break;
            const double h = 1e-7;
            Eigen::VectorXcd vm(2), vt(2);
            vm << Complex(m1, 0.0), std::polar(m2 + h, t);
            vt << Complex(m1, 0.0), std::polar(m2, t + h);
            const Complex fm = (Complex(load_bus.p_demand, load_bus.q_demand) +
                                bf_detail::injection(y, vm, 1) - f) / h;
            const Complex ft = (Complex(load_bus.p_demand, load_bus.q_demand) +
                                bf_detail::injection(y, vt, 1) - f) / h;
            Eigen::Matrix2d jac;
            jac << fm.real(), ft.real(), fm.imag(), ft.imag();
            if (std::abs(jac.determinant()) < 1e-14) return std::nullopt;
            const Eigen::Vector2d delta = jac.inverse() * Eigen::Vector2d(f.real(), f.imag());
            m2 -= delta[0];
            t -= delta[1];
            if (m2 <= 0.0) return std::nullopt;
        }
        Eigen::VectorXcd v(2);
        v << Complex(m1, 0.0), std::polar(m2, t);
        const Complex resid = Complex(load_bus.p_demand, load_bus.q_demand) +
                              bf_detail::injection(y, v, 1);
        if (std::abs(resid) > 1e-9) return std::nullopt;
        return v;
    };

    BruteForceResult best;
    auto consider = [&](double m1) {
        for (double m2_seed : {1.0, 0.95, 1.05, 0.8}) {
            for (double t_seed : {0.0, -0.2, 0.2, -0.5}) {
                auto v = balance_solution(m1, m2_seed, t_seed);
                if (!v) continue;
                const double m2 = std::abs((*v)[1]);
                if (m2 < load_bus.v_min - 1e-9 || m2 > load_bus.v_max + 1e-9) continue;
                const Complex s_g = Complex(gen_bus.p_demand, gen_bus.q_demand) +
                                    bf_detail::injection(y, *v, 0);
                if (s_g.real() < gen->p_min - 1e-9 || s_g.real() > gen->p_max + 1e-9) continue;
                if (s_g.imag() < gen->q_min - 1e-9 || s_g.imag() > gen->q_max + 1e-9) continue;
                const double cost = gen->c1 * s_g.real() + gen->c0;
                if (cost < best.best_cost) {
                    best.feasible_found = true;
                    best.best_cost = cost;
                    best.best_voltage = *v;
                }
            }
        }
    };

    double lo = gen_bus.v_fixed ? *gen_bus.v_fixed : gen_bus.v_min;
    double hi = gen_bus.v_fixed ? *gen_bus.v_fixed : gen_bus.v_max;
    double span = hi - lo;
    for (int level = 0; level < 4; ++level) {
        const int points = 41;
        double best_m1 = -1.0;
        double incumbent = best.best_cost;
        for (int p = 0; p < points; ++p) {
            const double m1 = span == 0.0 ? lo : lo + span * double(p) / double(points - 1);
            consider(m1);
            if (best.best_cost < incumbent) {
                incumbent = best.best_cost;
                best_m1 = m1;
            }
            if (span == 0.0) break;
        }
        if (span == 0.0 || !best.feasible_found) break;
        if (best_m1 >= 0.0) {
            const double width = span / double(points - 1);
            lo = std::max(gen_bus.v_min, best_m1 - width);
            hi = std::min(gen_bus.v_max, best_m1 + width);
            span = hi - lo;
        } else {
            break;  // no improvement this level
        }
    }
    return best;
}

}  // namespace opfcert::test
