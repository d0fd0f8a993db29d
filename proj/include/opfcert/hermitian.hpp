// Copyright (c) opfcert contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>

#include <complex>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace opfcert {

using Complex = std::complex<double>;

/// Default relative threshold separating converged-to-zero eigenvalues from
/// signal. Interior-point solutions are accurate to roughly 1e-8, so 1e-7
/// sits one decade above the noise floor.
inline constexpr double kDefaultRankTol = 1e-7;

/// Default singular-value ratio below which a column is treated as dependent.
inline constexpr double kDefaultIndepTol = 1e-8;

/// Maximum relative asymmetry accepted when constructing a HermitianMatrix.
inline constexpr double kHermitianTol = 1e-12;

/// Dense Hermitian matrix. Construction verifies a_ij = conj(a_ji) within
/// kHermitianTol (relative to the Frobenius norm) and then symmetrizes
/// exactly, so every stored matrix satisfies A == A* bit-for-bit.
class HermitianMatrix {
  public:
    HermitianMatrix() = default;

    explicit HermitianMatrix(const Eigen::MatrixXcd& raw) {
        if (raw.rows() != raw.cols()) {
            throw std::invalid_argument("HermitianMatrix: matrix must be square, got " +
                                        std::to_string(raw.rows()) + "x" +
                                        std::to_string(raw.cols()));
        }
        const double scale = std::max(1.0, raw.norm());
        const double asym = (raw - raw.adjoint()).norm();
        if (asym > 2.0 * kHermitianTol * scale) {
            throw std::invalid_argument("HermitianMatrix: input is not Hermitian (asymmetry " +
                                        std::to_string(asym) + ")");
        }
        mat_ = 0.5 * (raw + raw.adjoint());
    }

    static HermitianMatrix zero(Eigen::Index n) {
        return HermitianMatrix(Eigen::MatrixXcd::Zero(n, n), Trusted{});
    }

    static HermitianMatrix identity(Eigen::Index n) {
        return HermitianMatrix(Eigen::MatrixXcd::Identity(n, n), Trusted{});
    }

    /// Rank-one outer product vv*.
    static HermitianMatrix outer(const Eigen::VectorXcd& v) {
        return HermitianMatrix((v * v.adjoint()).eval(), Trusted{});
    }

    /// Wraps a matrix already known to be Hermitian, symmetrizing without the
    /// asymmetry check. Intended for callers that construct A + A* forms.
    static HermitianMatrix from_symmetric_parts(const Eigen::MatrixXcd& raw) {
        return HermitianMatrix((0.5 * (raw + raw.adjoint())).eval(), Trusted{});
    }

    Eigen::Index order() const { return mat_.rows(); }
    const Eigen::MatrixXcd& matrix() const { return mat_; }
    Complex operator()(Eigen::Index i, Eigen::Index j) const { return mat_(i, j); }
    double frobenius_norm() const { return mat_.norm(); }

    bool operator==(const HermitianMatrix& other) const { return mat_ == other.mat_; }

  private:
    struct Trusted {};
    HermitianMatrix(Eigen::MatrixXcd m, Trusted) : mat_(std::move(m)) {}

    Eigen::MatrixXcd mat_;
};

/// Frobenius inner product sum_ij a_ij conj(b_ij). Real for Hermitian
/// arguments; the imaginary part is checked against rounding noise and
/// discarded.
inline double frobenius_inner(const HermitianMatrix& a, const HermitianMatrix& b) {
    if (a.order() != b.order()) {
        throw std::invalid_argument("frobenius_inner: order mismatch " +
                                    std::to_string(a.order()) + " vs " +
                                    std::to_string(b.order()));
    }
    const Complex s = a.matrix().cwiseProduct(b.matrix().conjugate()).sum();
    const double scale = a.frobenius_norm() * b.frobenius_norm();
    if (std::abs(s.imag()) > 1e-10 * std::max(1.0, scale)) {
        throw std::runtime_error("frobenius_inner: unexpected imaginary part " +
                                 std::to_string(s.imag()));
    }
    return s.real();
}

/// Linear embedding of H^n into R^{n^2}: column-wise lower-triangular
/// traversal emitting a_jj, then Re(a_ij), Im(a_ij) for i > j. Linear
/// independence of Hermitian families is equivalent to full column rank of
/// the stacked images.
inline Eigen::VectorXd vec(const HermitianMatrix& a) {
    const Eigen::Index n = a.order();
    Eigen::VectorXd out(n * n);
    Eigen::Index k = 0;
    for (Eigen::Index j = 0; j < n; ++j) {
        out[k++] = a(j, j).real();
        for (Eigen::Index i = j + 1; i < n; ++i) {
            out[k++] = a(i, j).real();
            out[k++] = a(i, j).imag();
        }
    }
    return out;
}

/// Eigendecomposition A = Q diag(lambda) Q* with eigenvalues sorted
/// descending and Q unitary.
struct EigenDecomposition {
    Eigen::VectorXd eigenvalues;
    Eigen::MatrixXcd eigenvectors;
};

inline EigenDecomposition eig(const HermitianMatrix& a) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(a.matrix());
    if (solver.info() != Eigen::Success) {
        throw std::runtime_error(
            "eig: eigensolver failed to converge on order-" + std::to_string(a.order()) +
            " matrix (Frobenius norm " + std::to_string(a.frobenius_norm()) + ")");
    }
    // Eigen sorts ascending; flip to descending.
    EigenDecomposition d;
    d.eigenvalues = solver.eigenvalues().reverse();
    d.eigenvectors = solver.eigenvectors().rowwise().reverse();
    return d;
}

/// Count of eigenvalues exceeding tol_rel * max(1, |lambda_max|) in modulus.
inline Eigen::Index numerical_rank(const EigenDecomposition& d, double tol_rel = kDefaultRankTol) {
    if (tol_rel <= 0.0) {
        throw std::invalid_argument("numerical_rank: tolerance must be positive");
    }
    const double lead = d.eigenvalues.size() > 0 ? d.eigenvalues.cwiseAbs().maxCoeff() : 0.0;
    const double threshold = tol_rel * std::max(1.0, lead);
    return (d.eigenvalues.cwiseAbs().array() > threshold).count();
}

inline Eigen::Index numerical_rank(const HermitianMatrix& a, double tol_rel = kDefaultRankTol) {
    return numerical_rank(eig(a), tol_rel);
}

/// Rank of a real matrix by singular-value thresholding at
/// tol_rel * sigma_max. Optionally reports the smallest retained singular
/// value and the threshold used.
inline Eigen::Index column_rank(const Eigen::MatrixXd& v, double tol_rel,
                                double* smallest_retained = nullptr,
                                double* threshold_out = nullptr) {
    if (v.cols() == 0 || v.rows() == 0) {
        if (smallest_retained) *smallest_retained = 0.0;
        if (threshold_out) *threshold_out = 0.0;
        return 0;
    }
    Eigen::BDCSVD<Eigen::MatrixXd> svd(v);
    const Eigen::VectorXd& sigma = svd.singularValues();
    const double threshold = tol_rel * sigma[0];
    Eigen::Index rank = 0;
    while (rank < sigma.size() && sigma[rank] > threshold) ++rank;
    if (smallest_retained) *smallest_retained = rank > 0 ? sigma[rank - 1] : 0.0;
    if (threshold_out) *threshold_out = threshold;
    return rank;
}

struct IndependenceResult {
    bool all_independent = true;
    std::vector<int> basis;
    Eigen::Index svd_rank = 0;
    double smallest_retained = 0.0;
    double threshold = 0.0;
};

/// Linear-independence test for a family of Hermitian matrices via the
/// stacked vec images. The verdict uses the singular-value rank of the
/// n^2 x d stack; basis columns are chosen greedily in input order by
/// twice-reorthogonalized Gram-Schmidt against the same threshold.
inline IndependenceResult independent_subset(const std::vector<HermitianMatrix>& family,
                                             double tol_rel = kDefaultIndepTol) {
    IndependenceResult result;
    if (family.empty()) return result;

    const Eigen::Index n = family.front().order();
    const Eigen::Index d = static_cast<Eigen::Index>(family.size());
    Eigen::MatrixXd v(n * n, d);
    for (Eigen::Index j = 0; j < d; ++j) {
        if (family[j].order() != n) {
            throw std::invalid_argument("independent_subset: mixed matrix orders");
        }
        v.col(j) = vec(family[j]);
    }

    result.svd_rank = column_rank(v, tol_rel, &result.smallest_retained, &result.threshold);
    result.all_independent = (result.svd_rank == d);

    Eigen::MatrixXd q(n * n, std::min(v.rows(), d));
    Eigen::Index accepted = 0;
    for (Eigen::Index j = 0; j < d; ++j) {
        Eigen::VectorXd r = v.col(j);
        for (int pass = 0; pass < 2; ++pass) {
            if (accepted > 0) {
                r -= q.leftCols(accepted) * (q.leftCols(accepted).transpose() * r);
            }
        }
        if (r.norm() > result.threshold && accepted < q.cols()) {
            q.col(accepted++) = r / r.norm();
            result.basis.push_back(static_cast<int>(j));
        }
    }
    return result;
}

}  // namespace opfcert
