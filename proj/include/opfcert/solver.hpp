// Copyright (c) opfcert contributors
// SPDX-License-Identifier: Apache-2.0
//
// Primal-dual path-following interior-point solver for the Hermitian SDP
//
//   minimize    C . X
//   subject to  A_k . X  = b_k   (k < m)
//               A_k . X <= b_k   (m <= k < m + ell)
//               X PSD,
//
// handled internally in standard form over the block cone H^n_+ x R^ell_+
// by appending one nonnegative slack scalar per inequality. Search
// directions use Nesterov-Todd scaling with a Mehrotra predictor-corrector;
// the Schur complement is formed densely and factored with LDLT. Constraint
// matrices supported on a single row/column pair ("arrowheads", which is
// what power-network relaxations produce) get O(n) Schur entries instead of
// O(n^3).

#pragma once

#include <opfcert/hermitian.hpp>
#include <opfcert/relaxation.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <vector>

namespace opfcert {

enum class SolveStatus {
    optimal,
    max_iters,
    primal_infeasible_suspected,
    dual_infeasible_suspected,
    numerical_failure,
};

inline const char* status_name(SolveStatus s) {
    switch (s) {
        case SolveStatus::optimal: return "optimal";
        case SolveStatus::max_iters: return "max_iters";
        case SolveStatus::primal_infeasible_suspected: return "primal_infeasible_suspected";
        case SolveStatus::dual_infeasible_suspected: return "dual_infeasible_suspected";
        case SolveStatus::numerical_failure: return "numerical_failure";
    }
    return "?";
}

struct SolverConfig {
    double gap_tol = 1e-8;
    double feas_tol = 1e-8;
    int max_iters = 200;
    double step_fraction = 0.99;  // fraction-to-boundary
    // Relative magnitude of the deterministic jitter applied to the initial
    // point (0 disables); used to probe solution uniqueness.
    double init_perturbation = 0.0;
    std::uint64_t perturbation_seed = 0;
    std::ostream* iteration_log = nullptr;  // CSV: iter,mu,primal_res,dual_res,gap

    void validate() const {
        if (gap_tol <= 0 || feas_tol <= 0) {
            throw std::invalid_argument("SolverConfig: tolerances must be positive");
        }
        if (step_fraction <= 0 || step_fraction >= 1) {
            throw std::invalid_argument("SolverConfig: step_fraction must lie in (0,1)");
        }
        if (max_iters < 1) throw std::invalid_argument("SolverConfig: max_iters must be >= 1");
    }
};

struct Residuals {
    double primal_feas = 0.0;
    double dual_feas = 0.0;
    double rel_gap = 0.0;
};

struct SdpSolution {
    HermitianMatrix X;
    Eigen::VectorXd y;       // length m + ell, dual in the sign making Z = C + sum y_k A_k
    HermitianMatrix Z;       // C + sum y_k A_k, recomputed from y
    Eigen::VectorXd slacks;  // length ell, the scalar cone blocks
    SolveStatus status = SolveStatus::numerical_failure;
    double primal_obj = 0.0;
    double dual_obj = 0.0;
    Residuals residuals;
    int iterations = 0;
    std::string diagnostic;
};

inline Eigen::VectorXd problem_b(const SdpProblem& problem) {
    Eigen::VectorXd b(problem.m + problem.ell);
    for (int k = 0; k < problem.m + problem.ell; ++k) b[k] = problem.row(k).b;
    return b;
}

namespace detail {

struct ArrowForm {
    int pivot = 0;
    std::vector<std::pair<int, Complex>> entries;  // sparse v with A = v e_p^* + e_p v^*
};

inline bool arrow_fits(const Eigen::MatrixXcd& a, int pivot) {
    const Eigen::Index n = a.rows();
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            if (a(i, j) != 0.0 && i != pivot && j != pivot) return false;
        }
    }
    return true;
}

inline std::optional<ArrowForm> detect_arrow(const Eigen::MatrixXcd& a) {
    const Eigen::Index n = a.rows();
    int first_i = -1, first_j = -1;
    for (Eigen::Index i = 0; i < n && first_i < 0; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            if (a(i, j) != 0.0) {
                first_i = static_cast<int>(i);
                first_j = static_cast<int>(j);
                break;
            }
        }
    }
    int pivot;
    if (first_i < 0) {
        pivot = 0;  // zero matrix
    } else if (arrow_fits(a, first_i)) {
        pivot = first_i;
    } else if (arrow_fits(a, first_j)) {
        pivot = first_j;
    } else {
        return std::nullopt;
    }
    ArrowForm arrow;
    arrow.pivot = pivot;
    for (Eigen::Index i = 0; i < n; ++i) {
        const Complex v = i == pivot ? a(pivot, pivot) / 2.0 : a(i, pivot);
        if (v != 0.0) arrow.entries.emplace_back(static_cast<int>(i), v);
    }
    return arrow;
}

/// Problem data after objective and per-row scaling.
struct ScaledData {
    int n = 0;
    int m = 0;
    int ell = 0;
    int total = 0;
    double obj_scale = 1.0;
    Eigen::VectorXd row_scale;
    Eigen::MatrixXcd c;
    Eigen::VectorXd b;
    std::vector<Eigen::MatrixXcd> a;
    std::vector<std::optional<ArrowForm>> arrow;
};

inline ScaledData scale_problem(const SdpProblem& problem) {
    ScaledData d;
    d.n = problem.n;
    d.m = problem.m;
    d.ell = problem.ell;
    d.total = problem.m + problem.ell;
    d.obj_scale = std::max(1.0, problem.c.frobenius_norm() / std::sqrt(double(problem.n)));
    d.c = problem.c.matrix() / d.obj_scale;
    d.row_scale.resize(d.total);
    d.b.resize(d.total);
    d.a.reserve(d.total);
    d.arrow.reserve(d.total);
    for (int k = 0; k < d.total; ++k) {
        const SdpConstraint& row = problem.row(k);
        const double norm = row.a.frobenius_norm();
        const double scale = norm > 1e-12 ? norm : 1.0;  // keep zero rows unscaled
        d.row_scale[k] = scale;
        d.b[k] = row.b / scale;
        d.a.push_back(row.a.matrix() / scale);
        d.arrow.push_back(detect_arrow(d.a.back()));
    }
    return d;
}

inline double inner(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b) {
    return a.cwiseProduct(b.conjugate()).sum().real();
}

/// A_k . M for Hermitian M, using the arrowhead when available.
inline double constraint_dot(const ScaledData& d, int k, const Eigen::MatrixXcd& m) {
    if (d.arrow[k]) {
        const ArrowForm& ar = *d.arrow[k];
        Complex acc = 0.0;
        for (const auto& [i, v] : ar.entries) acc += std::conj(v) * m(i, ar.pivot);
        return 2.0 * acc.real();
    }
    return inner(d.a[k], m);
}

/// out = sum_k coeff_k A_k.
inline void accumulate_combination(const ScaledData& d, const Eigen::VectorXd& coeff,
                                   Eigen::MatrixXcd& out) {
    out.setZero();
    for (int k = 0; k < d.total; ++k) {
        const double c = coeff[k];
        if (c == 0.0) continue;
        if (d.arrow[k]) {
            const ArrowForm& ar = *d.arrow[k];
            for (const auto& [i, v] : ar.entries) {
                if (i == ar.pivot) {
                    out(i, i) += 2.0 * c * v.real();
                } else {
                    out(i, ar.pivot) += c * v;
                    out(ar.pivot, i) += c * std::conj(v);
                }
            }
        } else {
            out += c * d.a[k];
        }
    }
}

/// tr(W A_i W A_j) for two arrowheads A = v e_p^* + e_p v^*, given the
/// precomputed image a = W v_i. With h = W e_{p_i} (a column of W):
///   2 Re[(h^* v_j) a_{p_j}] + 2 Re[(a^* v_j) h_{p_j}].
inline double schur_entry_arrow(const Eigen::MatrixXcd& w, const Eigen::VectorXcd& wv_i,
                                const ArrowForm& ai, const ArrowForm& aj) {
    Complex hv = 0.0, av = 0.0;
    for (const auto& [idx, val] : aj.entries) {
        hv += std::conj(w(idx, ai.pivot)) * val;
        av += std::conj(wv_i[idx]) * val;
    }
    const Complex term1 = hv * wv_i[aj.pivot];
    const Complex term2 = av * w(aj.pivot, ai.pivot);
    return 2.0 * (term1.real() + term2.real());
}

inline double max_step_scalar(const Eigen::VectorXd& x, const Eigen::VectorXd& dx) {
    double alpha = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        if (dx[i] < 0) alpha = std::min(alpha, -x[i] / dx[i]);
    }
    return alpha;
}

/// Largest alpha keeping X + alpha dX PSD, via the smallest eigenvalue of
/// L^-1 dX L^-*.
inline double max_step_psd(const Eigen::LLT<Eigen::MatrixXcd>& llt, const Eigen::MatrixXcd& dx) {
    Eigen::MatrixXcd scaled = llt.matrixL().solve(dx);
    scaled = llt.matrixL().solve(scaled.adjoint()).adjoint();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(0.5 * (scaled + scaled.adjoint()),
                                                       Eigen::EigenvaluesOnly);
    const double lambda_min = es.eigenvalues().minCoeff();
    if (lambda_min >= -1e-14) return std::numeric_limits<double>::infinity();
    return -1.0 / lambda_min;
}

}  // namespace detail

inline SdpSolution solve(const SdpProblem& problem, const SolverConfig& config = {}) {
    using Eigen::MatrixXcd;
    using Eigen::VectorXd;
    config.validate();
    if (problem.n < 1) throw std::invalid_argument("solve: problem order must be >= 1");

    const detail::ScaledData data = detail::scale_problem(problem);
    const int n = data.n;
    const int m = data.m;
    const int ell = data.ell;
    const int total = data.total;

    SdpSolution sol;
    sol.y = VectorXd::Zero(total);
    sol.slacks = VectorXd::Zero(ell);

    // Maps the scaled iterates back to the public solution fields.
    auto finish = [&](SolveStatus status, const MatrixXcd& x_it, const VectorXd& s_it,
                      const VectorXd& lambda_it, const MatrixXcd& z_it, const VectorXd& zs_it,
                      int iters, const std::string& note) -> SdpSolution& {
        sol.status = status;
        sol.iterations = iters;
        sol.diagnostic = note;
        sol.X = HermitianMatrix::from_symmetric_parts(x_it);
        for (int k = 0; k < total; ++k) {
            sol.y[k] = -data.obj_scale * lambda_it[k] / data.row_scale[k];
        }
        for (int k = 0; k < ell; ++k) sol.slacks[k] = s_it[k] * data.row_scale[m + k];
        MatrixXcd z = problem.c.matrix();
        for (int k = 0; k < total; ++k) z += sol.y[k] * problem.row(k).a.matrix();
        sol.Z = HermitianMatrix::from_symmetric_parts(z);
        sol.primal_obj = frobenius_inner(problem.c, sol.X);
        sol.dual_obj = -problem_b(problem).dot(sol.y);

        double viol = 0.0;
        for (int k = 0; k < total; ++k) {
            const double gap = frobenius_inner(problem.row(k).a, sol.X) - problem.row(k).b;
            viol = std::max(viol, k < m ? std::abs(gap) : std::max(0.0, gap));
        }
        sol.residuals.primal_feas = viol;

        MatrixXcd combo(n, n);
        detail::accumulate_combination(data, lambda_it, combo);
        double dual_sq = (data.c - z_it - combo).squaredNorm();
        for (int k = 0; k < ell; ++k) {
            const double r = -zs_it[k] - lambda_it[m + k];
            dual_sq += r * r;
        }
        sol.residuals.dual_feas = data.obj_scale * std::sqrt(dual_sq);
        // Normalized complementarity; coincides with the objective gap once
        // both residuals vanish.
        double compl_sum = detail::inner(x_it, z_it);
        if (ell > 0 && s_it.size() == ell) compl_sum += s_it.dot(zs_it);
        sol.residuals.rel_gap = data.obj_scale * compl_sum /
                                (1.0 + std::abs(sol.primal_obj) + std::abs(sol.dual_obj));
        return sol;
    };

    // Unconstrained corner case: the optimum is X = 0 when C is PSD.
    if (total == 0) {
        Eigen::SelfAdjointEigenSolver<MatrixXcd> es(problem.c.matrix(), Eigen::EigenvaluesOnly);
        const MatrixXcd zero = MatrixXcd::Zero(n, n);
        const VectorXd empty;
        if (es.eigenvalues().minCoeff() >= -config.feas_tol) {
            return finish(SolveStatus::optimal, zero, empty, empty, data.c, empty, 0, "");
        }
        return finish(SolveStatus::dual_infeasible_suspected, zero, empty, empty, data.c, empty,
                      0, "objective has a negative eigenvalue and no constraints");
    }

    // Initial point: tau-scaled identity blocks, optionally jittered.
    double tau = 1.0 + data.b.cwiseAbs().maxCoeff();
    std::mt19937_64 rng(config.perturbation_seed);
    std::uniform_real_distribution<double> unit(-0.5, 0.5);
    auto jitter = [&](double base) {
        return config.init_perturbation > 0 ? base * (1.0 + config.init_perturbation * unit(rng))
                                            : base;
    };

    MatrixXcd x = MatrixXcd::Zero(n, n);
    MatrixXcd zmat = MatrixXcd::Zero(n, n);
    for (int i = 0; i < n; ++i) {
        x(i, i) = jitter(tau);
        zmat(i, i) = jitter(tau);
    }
    VectorXd s(ell), zs(ell);
    for (int k = 0; k < ell; ++k) {
        s[k] = jitter(tau);
        zs[k] = jitter(tau);
    }
    VectorXd lambda = VectorXd::Zero(total);

    VectorXd rp(total);
    MatrixXcd rd_mat(n, n), combo(n, n);
    VectorXd rd_s(ell);
    int stalled = 0;

    for (int iter = 0; iter < config.max_iters; ++iter) {
        for (int k = 0; k < total; ++k) {
            rp[k] = data.b[k] - detail::constraint_dot(data, k, x) - (k >= m ? s[k - m] : 0.0);
        }
        detail::accumulate_combination(data, lambda, combo);
        rd_mat = data.c - zmat - combo;
        for (int k = 0; k < ell; ++k) rd_s[k] = -zs[k] - lambda[m + k];

        const double mu = (detail::inner(x, zmat) + (ell > 0 ? s.dot(zs) : 0.0)) / double(n + ell);
        const double pobj = data.obj_scale * detail::inner(data.c, x);
        const double dobj = data.obj_scale * data.b.dot(lambda);
        const double obj_scale_sum = 1.0 + std::abs(pobj) + std::abs(dobj);
        const double gap_rel = (pobj - dobj) / obj_scale_sum;
        // Complementarity gap: equals the objective gap at exact feasibility
        // and stays clean when near-degenerate duals amplify tiny residuals.
        const double comp_gap = data.obj_scale * mu * double(n + ell) / obj_scale_sum;

        double pf = 0.0;  // worst feasibility violation of X itself, original scale
        for (int k = 0; k < total; ++k) {
            const double resid = k < m ? std::abs(rp[k]) : std::max(0.0, -rp[k] - s[k - m]);
            pf = std::max(pf, data.row_scale[k] * resid);
        }
        const double df = data.obj_scale * std::sqrt(rd_mat.squaredNorm() + rd_s.squaredNorm());

        if (config.iteration_log) {
            if (iter == 0) (*config.iteration_log) << "iter,mu,primal_res,dual_res,gap\n";
            (*config.iteration_log) << iter << "," << mu << "," << pf << "," << df << ","
                                    << comp_gap << "\n";
        }

        if (pf <= config.feas_tol && df <= config.feas_tol && comp_gap <= config.gap_tol &&
            std::abs(gap_rel) <= std::sqrt(config.gap_tol)) {
            return finish(SolveStatus::optimal, x, s, lambda, zmat, zs, iter, "");
        }

        // Divergence heuristics, reported as suspicion, never as a certificate.
        const double lambda_inf = lambda.cwiseAbs().maxCoeff();
        const double primal_mass = x.real().trace() + (ell > 0 ? s.sum() : 0.0);
        if (lambda_inf > 1e8 * tau && pf > 10.0 * config.feas_tol) {
            return finish(SolveStatus::primal_infeasible_suspected, x, s, lambda, zmat, zs, iter,
                          "dual iterate norm " + std::to_string(lambda_inf) +
                              " diverged with primal residual " + std::to_string(pf));
        }
        if (primal_mass > 1e8 * tau * double(n + ell) && df > 10.0 * config.feas_tol) {
            return finish(SolveStatus::dual_infeasible_suspected, x, s, lambda, zmat, zs, iter,
                          "primal iterate mass " + std::to_string(primal_mass) +
                              " diverged with dual residual " + std::to_string(df));
        }
        // Complementarity fully converged with one side of feasibility stuck:
        // the stuck side cannot be met.
        if (mu < 1e-12 * tau) {
            if (pf > 100.0 * config.feas_tol && df <= config.feas_tol) {
                return finish(SolveStatus::primal_infeasible_suspected, x, s, lambda, zmat, zs,
                              iter,
                              "complementarity converged while the primal residual stalled at " +
                                  std::to_string(pf));
            }
            if (df > 100.0 * config.feas_tol && pf <= config.feas_tol) {
                return finish(SolveStatus::dual_infeasible_suspected, x, s, lambda, zmat, zs,
                              iter,
                              "complementarity converged while the dual residual stalled at " +
                                  std::to_string(df));
            }
        }

        // Residual signature at breakdown: one side converged while the other
        // is stuck means the stuck side is likely infeasible.
        auto breakdown_status = [&](const std::string& what) -> SdpSolution& {
            if (pf > 100.0 * config.feas_tol && df <= std::sqrt(config.feas_tol) &&
                dobj > pobj) {
                return finish(SolveStatus::primal_infeasible_suspected, x, s, lambda, zmat, zs,
                              iter,
                              what + " with primal residual stalled at " + std::to_string(pf));
            }
            if (df > 100.0 * config.feas_tol && pf <= std::sqrt(config.feas_tol) &&
                pobj < dobj) {
                return finish(SolveStatus::dual_infeasible_suspected, x, s, lambda, zmat, zs,
                              iter,
                              what + " with dual residual stalled at " + std::to_string(df));
            }
            return finish(SolveStatus::numerical_failure, x, s, lambda, zmat, zs, iter, what);
        };

        // Nesterov-Todd scaling point W with W Z W = X.
        Eigen::LLT<MatrixXcd> llt_x(x);
        Eigen::LLT<MatrixXcd> llt_z(zmat);
        if (llt_x.info() != Eigen::Success) {
            x.diagonal().array() += 1e-12 * (1.0 + x.real().trace() / n);
            llt_x.compute(x);
        }
        if (llt_z.info() != Eigen::Success) {
            zmat.diagonal().array() += 1e-12 * (1.0 + zmat.real().trace() / n);
            llt_z.compute(zmat);
        }
        if (llt_x.info() != Eigen::Success || llt_z.info() != Eigen::Success) {
            return breakdown_status("iterate lost positive definiteness at iteration " +
                                    std::to_string(iter));
        }
        const MatrixXcd lx = llt_x.matrixL();
        const MatrixXcd lz = llt_z.matrixL();
        Eigen::JacobiSVD<MatrixXcd> svd(lz.adjoint() * lx,
                                        Eigen::ComputeThinU | Eigen::ComputeThinV);
        if (svd.singularValues().minCoeff() <= 0.0) {
            return finish(SolveStatus::numerical_failure, x, s, lambda, zmat, zs, iter,
                          "NT scaling broke down at iteration " + std::to_string(iter));
        }
        // In the scaled frame X and Z coincide with diag(sv), which makes the
        // linearized complementarity a trivial Lyapunov solve.
        const Eigen::VectorXd sv = svd.singularValues();
        const MatrixXcd g = lx * svd.matrixV() * sv.cwiseSqrt().cwiseInverse().asDiagonal();
        const MatrixXcd w = g * g.adjoint();
        VectorXd w2(ell);
        for (int k = 0; k < ell; ++k) w2[k] = s[k] / zs[k];

        // Maps M to G L_V^{-1}(M) G^* with L_V(M) = (VM + MV)/2, V = diag(sv).
        auto unscale_lyapunov = [&](const MatrixXcd& msym) {
            MatrixXcd solved(n, n);
            for (int i = 0; i < n; ++i) {
                for (int j = 0; j < n; ++j) {
                    solved(i, j) = msym(i, j) * (2.0 / (sv[i] + sv[j]));
                }
            }
            return (g * solved * g.adjoint()).eval();
        };

        // Per-constraint images under the scaling.
        std::vector<Eigen::VectorXcd> wv(total);
        std::vector<MatrixXcd> wt;
        std::vector<int> dense_slot(total, -1);
        for (int k = 0; k < total; ++k) {
            if (data.arrow[k]) {
                Eigen::VectorXcd v = Eigen::VectorXcd::Zero(n);
                for (const auto& [i, val] : data.arrow[k]->entries) v[i] = val;
                wv[k] = w * v;
            } else {
                dense_slot[k] = static_cast<int>(wt.size());
                wt.push_back(w * data.a[k] * w);
            }
        }

        // Schur complement M_ij = A_i . (W A_j W) (+ w^2 on inequality diagonal).
        Eigen::MatrixXd schur = Eigen::MatrixXd::Zero(total, total);
        for (int i = 0; i < total; ++i) {
            for (int j = 0; j <= i; ++j) {
                double value;
                if (data.arrow[i] && data.arrow[j]) {
                    value = detail::schur_entry_arrow(w, wv[i], *data.arrow[i], *data.arrow[j]);
                } else if (data.arrow[j]) {
                    value = detail::constraint_dot(data, j, wt[dense_slot[i]]);
                } else {
                    value = detail::constraint_dot(data, i, wt[dense_slot[j]]);
                }
                if (i == j && i >= m) value += w2[i - m];
                schur(i, j) = value;
                schur(j, i) = value;
            }
        }

        Eigen::LDLT<Eigen::MatrixXd> ldlt;
        Eigen::MatrixXd schur_reg = schur;
        bool factored = false;
        for (int attempt = 0; attempt < 4; ++attempt) {
            ldlt.compute(schur_reg);
            if (ldlt.info() == Eigen::Success &&
                ldlt.vectorD().minCoeff() > -1e-12 * (1.0 + schur.diagonal().maxCoeff())) {
                factored = true;
                break;
            }
            const double reg = std::pow(100.0, attempt) * 1e-12 *
                               (1.0 + schur.diagonal().maxCoeff());
            schur_reg = schur;
            schur_reg.diagonal().array() += reg;
        }
        if (!factored) {
            return finish(SolveStatus::numerical_failure, x, s, lambda, zmat, zs, iter,
                          "Schur complement factorization failed at iteration " +
                              std::to_string(iter));
        }

        auto solve_direction = [&](const MatrixXcd& rc_mat, const VectorXd& rc_s,
                                   MatrixXcd& dx, VectorXd& ds, VectorXd& dlambda,
                                   MatrixXcd& dz, VectorXd& dzs) {
            const MatrixXcd p = rc_mat - w * rd_mat * w;
            VectorXd rhs(total);
            for (int k = 0; k < total; ++k) {
                rhs[k] = rp[k] - detail::constraint_dot(data, k, p);
                if (k >= m) rhs[k] -= rc_s[k - m] - w2[k - m] * rd_s[k - m];
            }
            dlambda = ldlt.solve(rhs);
            dlambda += ldlt.solve((rhs - schur_reg * dlambda).eval());  // one refinement pass
            detail::accumulate_combination(data, dlambda, dz);
            dz = rd_mat - dz;
            for (int k = 0; k < ell; ++k) dzs[k] = rd_s[k] - dlambda[m + k];
            dx = rc_mat - w * dz * w;
            dx = 0.5 * (dx + dx.adjoint());
            for (int k = 0; k < ell; ++k) ds[k] = rc_s[k] - w2[k] * dzs[k];
        };

        MatrixXcd dx(n, n), dz(n, n);
        VectorXd ds(ell), dzs(ell), dlambda(total);

        // Predictor (affine scaling) direction.
        solve_direction(-x, -s, dx, ds, dlambda, dz, dzs);
        const double ap_aff = std::min(
            {detail::max_step_psd(llt_x, dx), detail::max_step_scalar(s, ds), 1.0});
        const double ad_aff = std::min(
            {detail::max_step_psd(llt_z, dz), detail::max_step_scalar(zs, dzs), 1.0});
        double mu_aff = detail::inner(x + ap_aff * dx, zmat + ad_aff * dz);
        if (ell > 0) mu_aff += (s + ap_aff * ds).dot(zs + ad_aff * dzs);
        mu_aff = std::max(0.0, mu_aff / double(n + ell));
        const double sigma = std::clamp(std::pow(mu_aff / std::max(mu, 1e-300), 3.0), 0.0, 1.0);

        // Mehrotra corrector assembled in the scaled frame:
        // R = sigma mu I - V^2 - sym(dX~ dZ~), then back through L_V and G.
        MatrixXcd dxs = lx.triangularView<Eigen::Lower>().solve(dx);
        dxs = lx.triangularView<Eigen::Lower>().solve(dxs.adjoint()).adjoint();
        dxs = sv.cwiseSqrt().asDiagonal() * svd.matrixV().adjoint() * dxs * svd.matrixV() *
              sv.cwiseSqrt().asDiagonal();
        const MatrixXcd dzs_mat = g.adjoint() * dz * g;
        MatrixXcd cross = dxs * dzs_mat;
        MatrixXcd r_scaled = -0.5 * (cross + cross.adjoint());
        r_scaled.diagonal().array() += sigma * mu;
        r_scaled.diagonal() -= sv.array().square().matrix();
        MatrixXcd rc_mat = unscale_lyapunov(r_scaled);
        VectorXd rc_s(ell);
        for (int k = 0; k < ell; ++k) rc_s[k] = (sigma * mu - ds[k] * dzs[k]) / zs[k] - s[k];
        solve_direction(rc_mat, rc_s, dx, ds, dlambda, dz, dzs);

        double ap = std::min(detail::max_step_psd(llt_x, dx), detail::max_step_scalar(s, ds));
        double ad = std::min(detail::max_step_psd(llt_z, dz), detail::max_step_scalar(zs, dzs));

        // Pure centering fallback when the corrector collapses the step.
        if (std::min(ap, ad) * config.step_fraction < 1e-4 &&
            std::min(ap_aff, ad_aff) > 1e-3) {
            r_scaled.setZero();
            r_scaled.diagonal().array() = 0.8 * mu;
            r_scaled.diagonal() -= sv.array().square().matrix();
            rc_mat = unscale_lyapunov(r_scaled);
            for (int k = 0; k < ell; ++k) rc_s[k] = 0.8 * mu / zs[k] - s[k];
            solve_direction(rc_mat, rc_s, dx, ds, dlambda, dz, dzs);
            ap = std::min(detail::max_step_psd(llt_x, dx), detail::max_step_scalar(s, ds));
            ad = std::min(detail::max_step_psd(llt_z, dz), detail::max_step_scalar(zs, dzs));
        }

        // Conservative fraction-to-boundary while steps are short, opening up
        // to the configured fraction once full steps become possible.
        if (!std::isfinite(ap)) ap = 1e30;
        if (!std::isfinite(ad)) ad = 1e30;
        const double gamma =
            std::min(config.step_fraction, 0.9 + 0.09 * std::min({1.0, ap, ad}));
        ap = std::min(1.0, gamma * ap);
        ad = std::min(1.0, gamma * ad);

        x += ap * dx;
        s += ap * ds;
        lambda += ad * dlambda;
        zmat += ad * dz;
        zs += ad * dzs;
        x = 0.5 * (x + x.adjoint());
        zmat = 0.5 * (zmat + zmat.adjoint());

        if (!x.allFinite() || !zmat.allFinite() || !lambda.allFinite()) {
            return finish(SolveStatus::numerical_failure, x, s, lambda, zmat, zs, iter,
                          "non-finite iterate at iteration " + std::to_string(iter));
        }
        if (std::min(ap, ad) < 1e-7) {
            if (++stalled >= 3) {
                return breakdown_status("step length collapsed for three consecutive iterations");
            }
        } else {
            stalled = 0;
        }
    }

    // Recompute residual context for the max_iters report.
    for (int k = 0; k < total; ++k) {
        rp[k] = data.b[k] - detail::constraint_dot(data, k, x) - (k >= m ? s[k - m] : 0.0);
    }
    return finish(SolveStatus::max_iters, x, s, lambda, zmat, zs, config.max_iters,
                  "iteration cap reached");
}

}  // namespace opfcert
