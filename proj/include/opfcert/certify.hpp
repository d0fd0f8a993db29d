// Copyright (c) opfcert contributors
// SPDX-License-Identifier: Apache-2.0
//
// Certificates for a solved relaxation: numerical ranks, the active
// inequality set, strict complementarity, primal/dual nondegeneracy in the
// Alizadeh-Haeberly-Overton sense, the uniqueness inferences they support,
// and the rank-one exclusion conditions built from constraint counting.

#pragma once

#include <opfcert/hermitian.hpp>
#include <opfcert/relaxation.hpp>
#include <opfcert/solver.hpp>

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>
#include <utility>
#include <vector>

namespace opfcert {

struct CertifyTolerances {
    double rank_rel = kDefaultRankTol;   // eigenvalue threshold, relative to the largest
    double active = 1e-6;                // slack threshold for activity, relative to 1+|b|
    double indep_rel = kDefaultIndepTol; // singular-value ratio for independence/spanning
};

struct NondegeneracyDiagnostics {
    Eigen::Index dimension_tested = 0;  // matrices to separate, or dim of the target space
    Eigen::Index rank_found = 0;
    double smallest_retained_singular_value = 0.0;
    double margin = 0.0;  // signed distance of the deciding singular value to the cutoff
};

enum class InexactnessVerdict { no_verdict, inexact_certified };

struct CertificateReport {
    int n = 0;
    int m = 0;
    int ell = 0;
    Eigen::Index rank_X = 0;
    Eigen::Index rank_Z = 0;
    std::vector<int> active_set;  // global constraint indices, sorted
    int a_X = 0;
    bool strict_complementarity = false;
    bool primal_nondegenerate = false;
    bool dual_nondegenerate = false;
    NondegeneracyDiagnostics primal_diag;
    NondegeneracyDiagnostics dual_diag;
    bool unique_primal_inferred = false;
    bool unique_dual_inferred = false;
    bool lemma1_condition = false;     // m + a(X) >= 2n
    InexactnessVerdict theorem2_verdict = InexactnessVerdict::no_verdict;
    bool corollary1_condition = false; // m >= 2n
    bool corollary3_condition = false; // 2 n_G <= a(X) + n_V
    CertifyTolerances tolerances_used;
    std::vector<std::string> warnings;
};

/// Pure arithmetic of the rank-one exclusion count: with a(X) active
/// inequalities on top of m equalities, any primal nondegenerate solution
/// must have rank above one once m + a(X) >= 2n.
inline bool lemma1_condition(int n, int m, int a_x) { return m + a_x >= 2 * n; }

inline bool corollary1_condition(int n, int m) { return m >= 2 * n; }

inline bool corollary3_condition(int n_gen, int a_x, int n_vfixed) {
    return 2 * n_gen <= a_x + n_vfixed;
}

/// Indices k of inequality rows with b_k - A_k . X within the activity
/// tolerance, i.e. the rows whose scalar cone block is numerically zero.
inline std::pair<std::vector<int>, int> active_set(const SdpProblem& problem,
                                                   const HermitianMatrix& x,
                                                   double tol_active = 1e-6) {
    std::vector<int> indices;
    for (int k = problem.m; k < problem.m + problem.ell; ++k) {
        const double slack = problem.row(k).b - frobenius_inner(problem.row(k).a, x);
        if (slack <= tol_active * (1.0 + std::abs(problem.row(k).b))) {
            indices.push_back(k);
        }
    }
    return {indices, static_cast<int>(indices.size())};
}

namespace detail {

struct SpanDiagnostics {
    Eigen::Index rank = 0;
    double sigma_deciding = 0.0;
    double threshold = 0.0;
    double smallest_retained = 0.0;
};

/// Singular-value profile of a column stack against the rank needed.
inline SpanDiagnostics span_diagnostics(const Eigen::MatrixXd& stack, Eigen::Index needed,
                                        double tol_rel) {
    SpanDiagnostics out;
    if (stack.cols() == 0 || stack.rows() == 0) return out;
    Eigen::BDCSVD<Eigen::MatrixXd> svd(stack);
    const Eigen::VectorXd& sigma = svd.singularValues();
    out.threshold = tol_rel * sigma[0];
    while (out.rank < sigma.size() && sigma[out.rank] > out.threshold) ++out.rank;
    out.smallest_retained = out.rank > 0 ? sigma[out.rank - 1] : 0.0;
    out.sigma_deciding =
        needed > 0 && needed <= sigma.size() ? sigma[needed - 1] : 0.0;
    return out;
}

inline void rank_margin_warning(const Eigen::VectorXd& eigenvalues, double tol_rel,
                                const char* label, std::vector<std::string>& warnings) {
    if (eigenvalues.size() == 0) return;
    const double lead = eigenvalues.cwiseAbs().maxCoeff();
    const double threshold = tol_rel * std::max(1.0, lead);
    for (Eigen::Index i = 0; i < eigenvalues.size(); ++i) {
        const double mag = std::abs(eigenvalues[i]);
        if (mag > threshold / 10.0 && mag < threshold * 10.0) {
            warnings.push_back(std::string(label) + ": eigenvalue " + std::to_string(mag) +
                               " lies within a decade of the rank threshold " +
                               std::to_string(threshold));
            return;
        }
    }
}

inline std::vector<int> certificate_rows(const SdpProblem& problem,
                                         const std::vector<int>& active) {
    std::vector<int> rows;
    rows.reserve(problem.m + active.size());
    for (int k = 0; k < problem.m; ++k) rows.push_back(k);
    rows.insert(rows.end(), active.begin(), active.end());
    return rows;
}

}  // namespace detail

/// Primal nondegeneracy: with Q = [Q1 Q2] splitting the eigenbasis of X at
/// its numerical rank r, the matrices Q* A_k Q with the trailing
/// (n-r) x (n-r) block zeroed must be linearly independent over the
/// equality and active rows.
inline std::pair<bool, NondegeneracyDiagnostics> primal_nondegenerate(
    const SdpProblem& problem, const HermitianMatrix& x, const std::vector<int>& active,
    const CertifyTolerances& tols = {}, std::vector<std::string>* warnings = nullptr) {
    const Eigen::Index n = x.order();
    const EigenDecomposition ed = eig(x);
    const Eigen::Index r = numerical_rank(ed, tols.rank_rel);
    if (warnings) detail::rank_margin_warning(ed.eigenvalues, tols.rank_rel, "primal", *warnings);

    const std::vector<int> rows = detail::certificate_rows(problem, active);
    NondegeneracyDiagnostics diag;
    diag.dimension_tested = static_cast<Eigen::Index>(rows.size());
    if (rows.empty()) return {true, diag};  // empty family is vacuously independent

    Eigen::MatrixXd stack(n * n, static_cast<Eigen::Index>(rows.size()));
    for (std::size_t j = 0; j < rows.size(); ++j) {
        Eigen::MatrixXcd b = ed.eigenvectors.adjoint() * problem.row(rows[j]).a.matrix() *
                             ed.eigenvectors;
        b.bottomRightCorner(n - r, n - r).setZero();
        stack.col(static_cast<Eigen::Index>(j)) =
            vec(HermitianMatrix::from_symmetric_parts(b));
    }
    const auto span = detail::span_diagnostics(stack, diag.dimension_tested, tols.indep_rel);
    diag.rank_found = span.rank;
    diag.smallest_retained_singular_value = span.smallest_retained;
    diag.margin = span.threshold > 0.0 ? span.sigma_deciding / span.threshold - 1.0 : 0.0;
    return {span.rank == diag.dimension_tested, diag};
}

/// Dual nondegeneracy: with P1 spanning the null space of Z (dimension
/// n - s), the compressions P1* A_k P1 over equality and active rows must
/// span the full Hermitian space of order n - s.
inline std::pair<bool, NondegeneracyDiagnostics> dual_nondegenerate(
    const SdpProblem& problem, const HermitianMatrix& z, const std::vector<int>& active,
    const CertifyTolerances& tols = {}, std::vector<std::string>* warnings = nullptr) {
    const Eigen::Index n = z.order();
    const EigenDecomposition ed = eig(z);
    const Eigen::Index s = numerical_rank(ed, tols.rank_rel);
    if (warnings) detail::rank_margin_warning(ed.eigenvalues, tols.rank_rel, "dual", *warnings);

    const Eigen::Index null_dim = n - s;
    NondegeneracyDiagnostics diag;
    diag.dimension_tested = null_dim * null_dim;
    if (null_dim == 0) return {true, diag};  // nothing left to span

    const Eigen::MatrixXcd p1 = ed.eigenvectors.rightCols(null_dim);
    const std::vector<int> rows = detail::certificate_rows(problem, active);
    if (rows.empty()) return {false, diag};

    Eigen::MatrixXd stack(null_dim * null_dim, static_cast<Eigen::Index>(rows.size()));
    for (std::size_t j = 0; j < rows.size(); ++j) {
        const Eigen::MatrixXcd b = p1.adjoint() * problem.row(rows[j]).a.matrix() * p1;
        stack.col(static_cast<Eigen::Index>(j)) =
            vec(HermitianMatrix::from_symmetric_parts(b));
    }
    const auto span = detail::span_diagnostics(stack, diag.dimension_tested, tols.indep_rel);
    diag.rank_found = span.rank;
    diag.smallest_retained_singular_value = span.smallest_retained;
    diag.margin = span.threshold > 0.0 ? span.sigma_deciding / span.threshold - 1.0 : -1.0;
    if (static_cast<Eigen::Index>(rows.size()) < diag.dimension_tested) diag.margin = -1.0;
    return {span.rank == diag.dimension_tested, diag};
}

/// rank(X) + rank(Z) == n at the chosen tolerance. A sum above n is a
/// tolerance artifact and is reported through the warning channel.
inline bool strict_complementarity(const HermitianMatrix& x, const HermitianMatrix& z,
                                   double tol_rel = kDefaultRankTol,
                                   std::vector<std::string>* warnings = nullptr) {
    const Eigen::Index sum = numerical_rank(x, tol_rel) + numerical_rank(z, tol_rel);
    if (sum > x.order() && warnings) {
        warnings->push_back("rank(X) + rank(Z) = " + std::to_string(sum) + " exceeds n = " +
                            std::to_string(x.order()) + "; treat ranks as tolerance artifacts");
    }
    return sum == x.order();
}

/// Fills the counting conditions and the final verdict. The rank-exclusion
/// verdict additionally requires strict complementarity, since without it
/// uniqueness of the high-rank face is not supported.
inline void inexactness_verdict(const SdpProblem& problem, CertificateReport& report) {
    report.lemma1_condition = lemma1_condition(problem.n, problem.m, report.a_X);
    report.corollary1_condition = corollary1_condition(problem.n, problem.m);
    report.corollary3_condition =
        corollary3_condition(problem.n_gen, report.a_X, problem.n_vfixed);
    report.unique_primal_inferred = report.dual_nondegenerate;
    report.unique_dual_inferred = report.primal_nondegenerate;
    report.theorem2_verdict =
        report.primal_nondegenerate && report.lemma1_condition && report.strict_complementarity
            ? InexactnessVerdict::inexact_certified
            : InexactnessVerdict::no_verdict;
}

inline CertificateReport certify(const SdpProblem& problem, const SdpSolution& solution,
                                 const CertifyTolerances& tols = {}) {
    if (solution.status != SolveStatus::optimal) {
        throw std::invalid_argument("certify: solution status must be optimal, got " +
                                    std::string(status_name(solution.status)));
    }
    CertificateReport report;
    report.n = problem.n;
    report.m = problem.m;
    report.ell = problem.ell;
    report.tolerances_used = tols;

    const EigenDecomposition ed_x = eig(solution.X);
    const EigenDecomposition ed_z = eig(solution.Z);
    report.rank_X = numerical_rank(ed_x, tols.rank_rel);
    report.rank_Z = numerical_rank(ed_z, tols.rank_rel);
    detail::rank_margin_warning(ed_x.eigenvalues, tols.rank_rel, "primal", report.warnings);
    detail::rank_margin_warning(ed_z.eigenvalues, tols.rank_rel, "dual", report.warnings);

    std::tie(report.active_set, report.a_X) = active_set(problem, solution.X, tols.active);

    std::tie(report.primal_nondegenerate, report.primal_diag) =
        primal_nondegenerate(problem, solution.X, report.active_set, tols, nullptr);
    std::tie(report.dual_nondegenerate, report.dual_diag) =
        dual_nondegenerate(problem, solution.Z, report.active_set, tols, nullptr);

    report.strict_complementarity =
        strict_complementarity(solution.X, solution.Z, tols.rank_rel, &report.warnings);

    // Under strict complementarity the rank face of X and the null space of
    // Z coincide; check the subspace angle as a consistency probe.
    if (report.strict_complementarity && report.rank_X > 0 && report.rank_X < problem.n) {
        const Eigen::MatrixXcd q1 = ed_x.eigenvectors.leftCols(report.rank_X);
        const Eigen::MatrixXcd p1 = ed_z.eigenvectors.rightCols(problem.n - report.rank_Z);
        Eigen::BDCSVD<Eigen::MatrixXcd> svd(q1.adjoint() * p1);
        const double cos_worst = svd.singularValues().minCoeff();
        const double sin_worst = std::sqrt(std::max(0.0, 1.0 - cos_worst * cos_worst));
        if (sin_worst > 1e-5) {
            report.warnings.push_back(
                "range(X) and null(Z) subspace angle sin = " + std::to_string(sin_worst) +
                " exceeds 1e-5 despite strict complementarity");
        }
    }

    inexactness_verdict(problem, report);
    return report;
}

// ---------------------------------------------------------------------------
// Serialization

inline nlohmann::json report_to_json(const CertificateReport& r) {
    auto diag_json = [](const NondegeneracyDiagnostics& d) {
        return nlohmann::json{{"dimension_tested", d.dimension_tested},
                              {"rank_found", d.rank_found},
                              {"smallest_retained_singular_value",
                               d.smallest_retained_singular_value},
                              {"margin", d.margin}};
    };
    return nlohmann::json{
        {"n", r.n},
        {"m", r.m},
        {"ell", r.ell},
        {"rank_X", r.rank_X},
        {"rank_Z", r.rank_Z},
        {"active_set", r.active_set},
        {"a_X", r.a_X},
        {"strict_complementarity", r.strict_complementarity},
        {"primal_nondegenerate", r.primal_nondegenerate},
        {"dual_nondegenerate", r.dual_nondegenerate},
        {"primal_diagnostics", diag_json(r.primal_diag)},
        {"dual_diagnostics", diag_json(r.dual_diag)},
        {"unique_primal_inferred", r.unique_primal_inferred},
        {"unique_dual_inferred", r.unique_dual_inferred},
        {"lemma1_condition", r.lemma1_condition},
        {"theorem2_verdict", r.theorem2_verdict == InexactnessVerdict::inexact_certified
                                 ? "inexact_certified"
                                 : "no_verdict"},
        {"corollary1_condition", r.corollary1_condition},
        {"corollary3_condition", r.corollary3_condition},
        {"tolerances",
         {{"rank_rel", r.tolerances_used.rank_rel},
          {"active", r.tolerances_used.active},
          {"indep_rel", r.tolerances_used.indep_rel}}},
        {"warnings", r.warnings}};
}

inline CertificateReport report_from_json(const nlohmann::json& doc) {
    CertificateReport r;
    r.n = doc.at("n").get<int>();
    r.m = doc.at("m").get<int>();
    r.ell = doc.at("ell").get<int>();
    r.rank_X = doc.at("rank_X").get<Eigen::Index>();
    r.rank_Z = doc.at("rank_Z").get<Eigen::Index>();
    r.active_set = doc.at("active_set").get<std::vector<int>>();
    r.a_X = doc.at("a_X").get<int>();
    r.strict_complementarity = doc.at("strict_complementarity").get<bool>();
    r.primal_nondegenerate = doc.at("primal_nondegenerate").get<bool>();
    r.dual_nondegenerate = doc.at("dual_nondegenerate").get<bool>();
    r.unique_primal_inferred = doc.at("unique_primal_inferred").get<bool>();
    r.unique_dual_inferred = doc.at("unique_dual_inferred").get<bool>();
    r.lemma1_condition = doc.at("lemma1_condition").get<bool>();
    r.theorem2_verdict = doc.at("theorem2_verdict").get<std::string>() == "inexact_certified"
                             ? InexactnessVerdict::inexact_certified
                             : InexactnessVerdict::no_verdict;
    r.corollary1_condition = doc.at("corollary1_condition").get<bool>();
    r.corollary3_condition = doc.at("corollary3_condition").get<bool>();
    if (doc.contains("warnings")) r.warnings = doc["warnings"].get<std::vector<std::string>>();
    return r;
}

inline std::string report_table_header() {
    char buffer[160];
    std::snprintf(buffer, sizeof(buffer), "%6s %8s %9s %9s %6s %6s  %s", "n", "rank(X)",
                  "Pnondeg", "Dnondeg", "m", "a(X)", "verdict");
    return buffer;
}

inline std::string report_table_row(const CertificateReport& r) {
    char buffer[160];
    std::snprintf(buffer, sizeof(buffer), "%6d %8lld %9s %9s %6d %6d  %s", r.n,
                  static_cast<long long>(r.rank_X), r.primal_nondegenerate ? "yes" : "no",
                  r.dual_nondegenerate ? "yes" : "no", r.m, r.a_X,
                  r.theorem2_verdict == InexactnessVerdict::inexact_certified
                      ? "inexact_certified"
                      : "no_verdict");
    return buffer;
}

}  // namespace opfcert
