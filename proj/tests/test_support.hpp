// Copyright (c) opfcert contributors
// SPDX-License-Identifier: Apache-2.0
//
// Test-only helpers and independent oracles. Nothing here may call back into
// the code path it is used to check: gram_rank works from inner products and
// a real eigensolve, real_embedding_spectrum from the 2n x 2n real symmetric
// embedding.

#pragma once

#include <opfcert/hermitian.hpp>

#include <Eigen/Dense>

#include <random>
#include <vector>

namespace opfcert::test {

inline HermitianMatrix random_hermitian(int n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::MatrixXcd m(n, n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            m(i, j) = Complex(gauss(rng), gauss(rng));
        }
    }
    return HermitianMatrix::from_symmetric_parts(m);
}

/// Random PSD matrix with exact rank r (sum of r independent outer products).
inline HermitianMatrix random_hermitian_of_rank(int n, int r, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(n, n);
    for (int k = 0; k < r; ++k) {
        Eigen::VectorXcd v(n);
        for (int i = 0; i < n; ++i) v[i] = Complex(gauss(rng), gauss(rng));
        m += v * v.adjoint();
    }
    return HermitianMatrix::from_symmetric_parts(m);
}

/// Eigenvalues (descending) of [[Re A, -Im A], [Im A, Re A]], computed with
/// the real symmetric solver only.
inline Eigen::VectorXd real_embedding_spectrum(const HermitianMatrix& a) {
    const Eigen::Index n = a.order();
    Eigen::MatrixXd m(2 * n, 2 * n);
    m.topLeftCorner(n, n) = a.matrix().real();
    m.topRightCorner(n, n) = -a.matrix().imag();
    m.bottomLeftCorner(n, n) = a.matrix().imag();
    m.bottomRightCorner(n, n) = a.matrix().real();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(m, Eigen::EigenvaluesOnly);
    return solver.eigenvalues().reverse();
}

/// Rank of the Gram matrix G_ij = <A_i, A_j>. Eigenvalues of G are squared
/// singular values of the family stack, so thresholding at tol_rel * lead
/// corresponds to sqrt(tol_rel) on the singular-value scale; squaring the
/// tolerance instead would cut at machine-epsilon level. Intended for
/// families whose dependencies are exact, not borderline.
inline Eigen::Index gram_rank(const std::vector<HermitianMatrix>& family,
                              double tol_rel = kDefaultIndepTol) {
    const Eigen::Index d = static_cast<Eigen::Index>(family.size());
    if (d == 0) return 0;
    Eigen::MatrixXd g(d, d);
    for (Eigen::Index i = 0; i < d; ++i) {
        for (Eigen::Index j = 0; j < d; ++j) {
            g(i, j) = frobenius_inner(family[i], family[j]);
        }
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(g, Eigen::EigenvaluesOnly);
    const double lead = solver.eigenvalues().cwiseAbs().maxCoeff();
    if (lead <= 0.0) return 0;
    const double threshold = tol_rel * lead;
    return (solver.eigenvalues().array() > threshold).count();
}

/// vec with off-diagonal entries scaled by sqrt(2); built directly from the
/// entries so the isometry test does not reuse library vec.
inline Eigen::VectorXd vec_scaled(const HermitianMatrix& a) {
    const Eigen::Index n = a.order();
    const double root2 = std::sqrt(2.0);
    Eigen::VectorXd out(n * n);
    Eigen::Index k = 0;
    for (Eigen::Index j = 0; j < n; ++j) {
        out[k++] = a(j, j).real();
        for (Eigen::Index i = j + 1; i < n; ++i) {
            out[k++] = root2 * a(i, j).real();
            out[k++] = root2 * a(i, j).imag();
        }
    }
    return out;
}

}  // namespace opfcert::test
