// Copyright (c) opfcert contributors
// SPDX-License-Identifier: Apache-2.0
//
// Parametric load study: grid the demand space at selected buses, solve and
// certify every instance, classify the load profiles by the rank and dual
// nondegeneracy of the resulting optimum, and optionally re-solve with
// load oversatisfaction to measure the balance violation it induces.

#pragma once

#include <opfcert/casefile.hpp>
#include <opfcert/certify.hpp>
#include <opfcert/relaxation.hpp>
#include <opfcert/solver.hpp>

#include <json.hpp>

#include <atomic>
#include <cmath>
#include <cstdio>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace opfcert {

struct SweepSpec {
    CaseModel case_model;
    std::vector<int> swept_buses;  // external bus ids
    double range_low = 0.0;        // MW, applied to both demand components
    double range_high = 3.0;
    int points_per_axis = 10;
    bool oversat_crosscheck = false;
    int workers = 1;  // <= 0 means hardware concurrency
    SolverConfig solver;
    CertifyTolerances certify_tols;

    int axes() const { return 2 * static_cast<int>(swept_buses.size()); }

    long record_count() const {
        long total = 1;
        for (int a = 0; a < axes(); ++a) total *= points_per_axis;
        return total;
    }

    void validate() const {
        if (points_per_axis < 2) throw std::invalid_argument("sweep: need >= 2 points per axis");
        if (!(range_low < range_high)) throw std::invalid_argument("sweep: empty demand range");
        if (swept_buses.empty()) throw std::invalid_argument("sweep: no swept buses");
        for (int id : swept_buses) case_model.internal_index(id);  // throws on unknown ids
    }

    double axis_value(long index) const {
        return range_low + (range_high - range_low) * double(index) / (points_per_axis - 1);
    }

    /// Axis indices of a grid point; the last axis varies fastest.
    std::vector<long> decompose(long grid_index) const {
        std::vector<long> idx(axes());
        for (int a = axes() - 1; a >= 0; --a) {
            idx[a] = grid_index % points_per_axis;
            grid_index /= points_per_axis;
        }
        return idx;
    }

    std::string axis_name(int axis) const {
        const int bus = swept_buses[axis / 2];
        return "bus" + std::to_string(bus) + (axis % 2 == 0 ? "_pd_mw" : "_qd_mw");
    }
};

enum class SweepClass { r1, r2, degenerate, infeasible, failed };

inline const char* classification_name(SweepClass c) {
    switch (c) {
        case SweepClass::r1: return "R1";
        case SweepClass::r2: return "R2";
        case SweepClass::degenerate: return "degenerate";
        case SweepClass::infeasible: return "infeasible";
        case SweepClass::failed: return "failed";
    }
    return "?";
}

struct SweepRecord {
    long grid_index = 0;
    std::vector<double> grid_point;  // MW per axis
    SolveStatus status = SolveStatus::numerical_failure;
    SweepClass classification = SweepClass::failed;
    Eigen::Index rank_X = -1;
    int a_X = -1;
    bool primal_nondegenerate = false;
    bool dual_nondegenerate = false;
    bool lemma1_condition = false;
    double objective = std::numeric_limits<double>::quiet_NaN();
    std::optional<double> oversat_residual;
};

struct SweepSummary {
    long total = 0;
    long r1 = 0;
    long r2 = 0;
    long degenerate = 0;
    long infeasible = 0;
    long failed = 0;
    long violation_count = 0;   // rank-one despite nondegeneracy and the count condition
    long r2_lemma1_count = 0;   // R2 records satisfying m + a >= 2n

    double fraction(long part) const { return total > 0 ? double(part) / double(total) : 0.0; }
};

struct SweepResult {
    std::vector<SweepRecord> records;
    SweepSummary summary;
};

namespace detail {

inline CaseModel case_at_grid_point(const SweepSpec& spec, const std::vector<double>& mw) {
    CaseModel model = spec.case_model;
    for (std::size_t b = 0; b < spec.swept_buses.size(); ++b) {
        const int internal = model.internal_index(spec.swept_buses[b]);
        model.buses[internal].p_demand = mw[2 * b] / model.base_mva;
        model.buses[internal].q_demand = mw[2 * b + 1] / model.base_mva;
    }
    return model;
}

}  // namespace detail

/// Re-solves one grid point with the balance equalities relaxed to
/// oversatisfied inequalities and returns the worst per-load-bus balance
/// gap |S_D + injection| at the relaxed optimum. Rows the relaxed optimum
/// holds within sqrt-tolerance are pinned and the instance re-solved once,
/// so interior-point slack on weakly priced rows does not read as a
/// violation. Empty when the relaxed solve fails.
inline std::optional<double> oversatisfaction_crosscheck(const SweepSpec& spec,
                                                         const SweepRecord& record) {
    const CaseModel instance = detail::case_at_grid_point(spec, record.grid_point);
    SdpProblem relaxed = build_sdp(instance, {.oversatisfaction = true});
    SdpProblem reduced;
    try {
        reduced = equality_basis(relaxed);
    } catch (const InconsistentEqualities&) {
        return std::nullopt;
    }
    SdpSolution sol = solve(reduced, spec.solver);
    if (sol.status != SolveStatus::optimal) return std::nullopt;

    auto worst_gap = [&](const SdpProblem& p, const HermitianMatrix& x) {
        double worst = 0.0;
        for (int k = 0; k < p.m + p.ell; ++k) {
            const SdpConstraint& row = p.row(k);
            if (row.tag != ConstraintTag::p_oversat) continue;
            const SdpConstraint& qrow = p.row(k + 1);  // paired reactive row
            const double p_gap = row.b - frobenius_inner(row.a, x);
            const double q_gap = qrow.b - frobenius_inner(qrow.a, x);
            worst = std::max(worst, std::hypot(p_gap, q_gap));
        }
        return worst;
    };

    const double raw = worst_gap(reduced, sol.X);
    const double pin_tol = std::sqrt(spec.solver.gap_tol);
    SdpProblem polished = reduced;
    int pinned = 0;
    std::vector<SdpConstraint> eq(polished.constraints.begin(),
                                  polished.constraints.begin() + polished.m);
    std::vector<SdpConstraint> ineq;
    for (int k = polished.m; k < polished.m + polished.ell; ++k) {
        SdpConstraint row = polished.row(k);
        const bool balance_row =
            row.tag == ConstraintTag::p_oversat || row.tag == ConstraintTag::q_oversat;
        const double slack = row.b - frobenius_inner(row.a, sol.X);
        if (balance_row && slack <= pin_tol * (1.0 + std::abs(row.b))) {
            row.kind = ConstraintKind::equality;
            eq.push_back(row);
            ++pinned;
        } else {
            ineq.push_back(row);
        }
    }
    if (pinned > 0) {
        polished.m += pinned;
        polished.ell -= pinned;
        polished.constraints = std::move(eq);
        polished.constraints.insert(polished.constraints.end(), ineq.begin(), ineq.end());
        try {
            const SdpSolution repolished = solve(equality_basis(polished), spec.solver);
            if (repolished.status == SolveStatus::optimal &&
                repolished.primal_obj <=
                    sol.primal_obj + 1e-6 * (1.0 + std::abs(sol.primal_obj))) {
                return worst_gap(reduced, repolished.X);
            }
        } catch (const InconsistentEqualities&) {
            // fall through to the unpolished measurement
        }
    }
    return raw;
}

/// Solves and certifies every grid point. Records land in grid order no
/// matter how many workers run; failures are recorded, never fatal.
inline SweepResult run_sweep(const SweepSpec& spec) {
    spec.validate();
    const long total = spec.record_count();
    SweepResult result;
    result.records.resize(static_cast<std::size_t>(total));

    auto process = [&](long grid_index) {
        SweepRecord record;
        record.grid_index = grid_index;
        const std::vector<long> idx = spec.decompose(grid_index);
        record.grid_point.resize(spec.axes());
        for (int a = 0; a < spec.axes(); ++a) record.grid_point[a] = spec.axis_value(idx[a]);

        const CaseModel instance = detail::case_at_grid_point(spec, record.grid_point);
        try {
            SdpProblem problem = equality_basis(build_sdp(instance));
            const SdpSolution sol = solve(problem, spec.solver);
            record.status = sol.status;
            switch (sol.status) {
                case SolveStatus::optimal: {
                    const CertificateReport report = certify(problem, sol, spec.certify_tols);
                    record.rank_X = report.rank_X;
                    record.a_X = report.a_X;
                    record.primal_nondegenerate = report.primal_nondegenerate;
                    record.dual_nondegenerate = report.dual_nondegenerate;
                    record.lemma1_condition = report.lemma1_condition;
                    record.objective = sol.primal_obj + problem.cost_offset;
                    if (!report.dual_nondegenerate) {
                        record.classification = SweepClass::degenerate;
                    } else {
                        record.classification =
                            report.rank_X == 1 ? SweepClass::r1 : SweepClass::r2;
                    }
                    break;
                }
                case SolveStatus::primal_infeasible_suspected:
                case SolveStatus::dual_infeasible_suspected:
                    record.classification = SweepClass::infeasible;
                    break;
                default:
                    record.classification = SweepClass::failed;
                    break;
            }
        } catch (const InconsistentEqualities&) {
            record.status = SolveStatus::primal_infeasible_suspected;
            record.classification = SweepClass::infeasible;
        } catch (const std::exception&) {
            record.classification = SweepClass::failed;
        }

        if (spec.oversat_crosscheck && (record.classification == SweepClass::r1 ||
                                        record.classification == SweepClass::r2)) {
            record.oversat_residual = oversatisfaction_crosscheck(spec, record);
        }
        result.records[static_cast<std::size_t>(grid_index)] = std::move(record);
    };

    int workers = spec.workers;
    if (workers <= 0) workers = static_cast<int>(std::thread::hardware_concurrency());
    workers = std::max(1, std::min<int>(workers, static_cast<int>(total)));

    if (workers == 1) {
        for (long i = 0; i < total; ++i) process(i);
    } else {
        std::atomic<long> next{0};
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(workers));
        for (int t = 0; t < workers; ++t) {
            pool.emplace_back([&]() {
                for (long i = next.fetch_add(1); i < total; i = next.fetch_add(1)) process(i);
            });
        }
        for (std::thread& t : pool) t.join();
    }

    SweepSummary& summary = result.summary;
    summary.total = total;
    for (const SweepRecord& r : result.records) {
        switch (r.classification) {
            case SweepClass::r1: ++summary.r1; break;
            case SweepClass::r2: ++summary.r2; break;
            case SweepClass::degenerate: ++summary.degenerate; break;
            case SweepClass::infeasible: ++summary.infeasible; break;
            case SweepClass::failed: ++summary.failed; break;
        }
        if (r.classification == SweepClass::r2 && r.lemma1_condition) ++summary.r2_lemma1_count;
        if (r.status == SolveStatus::optimal && r.primal_nondegenerate && r.lemma1_condition &&
            r.rank_X == 1) {
            ++summary.violation_count;
        }
    }
    return result;
}

// ---------------------------------------------------------------------------
// Tabular outputs

inline std::string records_to_csv(const SweepResult& result, const SweepSpec& spec) {
    std::ostringstream out;
    out << "grid_index";
    for (int a = 0; a < spec.axes(); ++a) out << "," << spec.axis_name(a);
    out << ",status,classification,rank_X,a_X,m_plus_a_ge_2n,oversat_residual\n";
    char num[64];
    for (const SweepRecord& r : result.records) {
        out << r.grid_index;
        for (double v : r.grid_point) {
            std::snprintf(num, sizeof(num), "%.9g", v);
            out << "," << num;
        }
        out << "," << status_name(r.status) << "," << classification_name(r.classification)
            << "," << r.rank_X << "," << r.a_X << "," << (r.lemma1_condition ? 1 : 0) << ",";
        if (r.oversat_residual) {
            std::snprintf(num, sizeof(num), "%.9g", *r.oversat_residual);
            out << num;
        }
        out << "\n";
    }
    return out.str();
}

inline nlohmann::json summary_to_json(const SweepSummary& s) {
    return nlohmann::json{{"total", s.total},
                          {"r1", s.r1},
                          {"r2", s.r2},
                          {"degenerate", s.degenerate},
                          {"infeasible", s.infeasible},
                          {"failed", s.failed},
                          {"r1_fraction", s.fraction(s.r1)},
                          {"r2_fraction", s.fraction(s.r2)},
                          {"degenerate_fraction", s.fraction(s.degenerate)},
                          {"infeasible_fraction", s.fraction(s.infeasible)},
                          {"failed_fraction", s.fraction(s.failed)},
                          {"r2_lemma1_count", s.r2_lemma1_count},
                          {"violation_count", s.violation_count}};
}

struct SectionRow {
    double axis1_value = 0.0;
    double axis2_value = 0.0;
    SweepClass classification = SweepClass::failed;
};

/// Two-dimensional section of the grid: rows over (axis1, axis2) with every
/// other axis pinned to the given index (defaults to the low end).
inline std::vector<SectionRow> emit_region_sections(const SweepResult& result,
                                                    const SweepSpec& spec, int axis1, int axis2,
                                                    const std::vector<long>& fixed_indices = {}) {
    if (axis1 < 0 || axis2 < 0 || axis1 >= spec.axes() || axis2 >= spec.axes() ||
        axis1 == axis2) {
        throw std::invalid_argument("emit_region_sections: invalid axis pair");
    }
    std::vector<long> pinned(spec.axes(), 0);
    if (!fixed_indices.empty()) {
        if (fixed_indices.size() != static_cast<std::size_t>(spec.axes())) {
            throw std::invalid_argument("emit_region_sections: fixed_indices size mismatch");
        }
        pinned = fixed_indices;
    }
    std::vector<SectionRow> rows;
    if (result.records.empty()) return rows;
    rows.reserve(static_cast<std::size_t>(spec.points_per_axis) * spec.points_per_axis);
    for (long i1 = 0; i1 < spec.points_per_axis; ++i1) {
        for (long i2 = 0; i2 < spec.points_per_axis; ++i2) {
            std::vector<long> idx = pinned;
            idx[axis1] = i1;
            idx[axis2] = i2;
            long flat = 0;
            for (int a = 0; a < spec.axes(); ++a) flat = flat * spec.points_per_axis + idx[a];
            const SweepRecord& r = result.records[static_cast<std::size_t>(flat)];
            rows.push_back(SectionRow{spec.axis_value(i1), spec.axis_value(i2),
                                      r.classification});
        }
    }
    return rows;
}

inline std::string section_to_csv(const std::vector<SectionRow>& rows, const SweepSpec& spec,
                                  int axis1, int axis2) {
    std::ostringstream out;
    out << spec.axis_name(axis1) << "," << spec.axis_name(axis2) << ",classification\n";
    char num[64];
    for (const SectionRow& r : rows) {
        std::snprintf(num, sizeof(num), "%.9g", r.axis1_value);
        out << num << ",";
        std::snprintf(num, sizeof(num), "%.9g", r.axis2_value);
        out << num << "," << classification_name(r.classification) << "\n";
    }
    return out.str();
}

}  // namespace opfcert
