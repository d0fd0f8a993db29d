// Copyright (c) opfcert contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <opfcert/casefile.hpp>
#include <opfcert/hermitian.hpp>

#include <Eigen/Dense>
#include <json.hpp>

#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

namespace opfcert {

enum class ConstraintKind { equality, inequality };

/// Role of a constraint row within the network model. "flow" is reserved for
/// branch MVA limits, which the builder does not emit.
enum class ConstraintTag {
    p_balance,
    q_balance,
    vmag_fixed,
    gen_p_max,
    gen_p_min,
    gen_q_max,
    gen_q_min,
    vmag_max,
    vmag_min,
    p_oversat,
    q_oversat,
    flow,
};

inline const char* tag_name(ConstraintTag tag) {
    switch (tag) {
        case ConstraintTag::p_balance: return "P-balance";
        case ConstraintTag::q_balance: return "Q-balance";
        case ConstraintTag::vmag_fixed: return "Vmag-fixed";
        case ConstraintTag::gen_p_max: return "Pmax";
        case ConstraintTag::gen_p_min: return "Pmin";
        case ConstraintTag::gen_q_max: return "Qmax";
        case ConstraintTag::gen_q_min: return "Qmin";
        case ConstraintTag::vmag_max: return "Vmax";
        case ConstraintTag::vmag_min: return "Vmin";
        case ConstraintTag::p_oversat: return "P-oversat";
        case ConstraintTag::q_oversat: return "Q-oversat";
        case ConstraintTag::flow: return "flow";
    }
    return "?";
}

struct SdpConstraint {
    HermitianMatrix a;
    double b = 0.0;
    ConstraintKind kind = ConstraintKind::equality;
    ConstraintTag tag = ConstraintTag::flow;
    int bus = -1;  // external bus id carried for reporting

    std::string label() const {
        return std::string(tag_name(tag)) + " bus " + std::to_string(bus);
    }
};

/// Linear conic program data: minimize C . X subject to A_k . X = b_k for
/// k < m, A_k . X <= b_k for the remaining ell rows, X Hermitian PSD of
/// order n. Equality rows always precede inequality rows. cost_offset makes
/// C . X + cost_offset equal the generation cost of the network solution.
struct SdpProblem {
    int n = 0;
    HermitianMatrix c;
    std::vector<SdpConstraint> constraints;
    int m = 0;
    int ell = 0;
    double cost_offset = 0.0;
    // Network statistics carried through for the certificate conditions.
    int n_gen = 0;
    int n_vfixed = 0;

    const SdpConstraint& row(int k) const { return constraints[static_cast<std::size_t>(k)]; }
};

/// Hermitian matrices expressing bus-i power injection and voltage magnitude
/// as linear functionals of X = VV*:
///   phi . X  = Re(injection),  psi . X = Im(injection),  m_mag . X = |V_i|^2.
struct InjectionMatrices {
    HermitianMatrix phi;
    HermitianMatrix psi;
    HermitianMatrix m_mag;
};

inline InjectionMatrices injection_matrices(const Eigen::MatrixXcd& y, int i) {
    const Eigen::Index n = y.rows();
    if (i < 0 || i >= n) throw std::out_of_range("injection_matrices: bus index out of range");
    // Column i of Y^* is the conjugated i-th row of Y.
    Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(n, n);
    m.col(i) = y.row(i).conjugate().transpose();
    InjectionMatrices out;
    out.phi = HermitianMatrix::from_symmetric_parts(m);
    const std::complex<double> half_j(0.0, 0.5);
    out.psi = HermitianMatrix((m - m.adjoint()).eval() * (-half_j));
    Eigen::MatrixXcd e = Eigen::MatrixXcd::Zero(n, n);
    e(i, i) = 1.0;
    out.m_mag = HermitianMatrix(e);
    return out;
}

struct BuildOptions {
    bool oversatisfaction = false;
    bool vfixed_as_equality = true;
};

/// Lower bound on the number of equality rows implied by the network
/// structure: two balance rows per load bus plus one per fixed-magnitude bus.
inline int eq6_lower_bound(const CaseModel& model) {
    return 2 * (model.n() - model.n_gen()) + model.n_vfixed();
}

/// Assembles the semidefinite relaxation. Row order is deterministic:
/// equalities are load-balance pairs by bus index then fixed-magnitude rows;
/// inequalities are oversatisfied balance pairs (if enabled), generator
/// bound quadruples by bus index, then voltage-range pairs.
inline SdpProblem build_sdp(const CaseModel& model, const BuildOptions& options = {}) {
    const int n = model.n();
    const Eigen::MatrixXcd y = build_admittance(model);

    std::vector<InjectionMatrices> inj;
    inj.reserve(n);
    for (int i = 0; i < n; ++i) inj.push_back(injection_matrices(y, i));

    SdpProblem problem;
    problem.n = n;
    problem.n_gen = model.n_gen();
    problem.n_vfixed = model.n_vfixed();

    std::vector<SdpConstraint> equalities;
    std::vector<SdpConstraint> inequalities;
    auto emit = [](std::vector<SdpConstraint>& dst, HermitianMatrix a, double b,
                   ConstraintKind kind, ConstraintTag tag, int bus_id) {
        dst.push_back(SdpConstraint{std::move(a), b, kind, tag, bus_id});
    };

    for (int i = 0; i < n; ++i) {
        if (model.is_gen_bus(i)) continue;
        const Bus& bus = model.buses[i];
        if (options.oversatisfaction) {
            // Delivered power may exceed demand: injection + demand <= 0.
            emit(inequalities, inj[i].phi, -bus.p_demand, ConstraintKind::inequality,
                 ConstraintTag::p_oversat, bus.id);
            emit(inequalities, inj[i].psi, -bus.q_demand, ConstraintKind::inequality,
                 ConstraintTag::q_oversat, bus.id);
        } else {
            emit(equalities, inj[i].phi, -bus.p_demand, ConstraintKind::equality,
                 ConstraintTag::p_balance, bus.id);
            emit(equalities, inj[i].psi, -bus.q_demand, ConstraintKind::equality,
                 ConstraintTag::q_balance, bus.id);
        }
    }
    for (int i = 0; i < n; ++i) {
        const Bus& bus = model.buses[i];
        if (bus.v_fixed && options.vfixed_as_equality) {
            emit(equalities, inj[i].m_mag, *bus.v_fixed * *bus.v_fixed, ConstraintKind::equality,
                 ConstraintTag::vmag_fixed, bus.id);
        }
    }
    for (const Generator& g : model.generators) {
        const Bus& bus = model.buses[g.bus];
        const HermitianMatrix& phi = inj[g.bus].phi;
        const HermitianMatrix& psi = inj[g.bus].psi;
        HermitianMatrix neg_phi(-phi.matrix());
        HermitianMatrix neg_psi(-psi.matrix());
        emit(inequalities, phi, g.p_max - bus.p_demand, ConstraintKind::inequality,
             ConstraintTag::gen_p_max, bus.id);
        emit(inequalities, neg_phi, bus.p_demand - g.p_min, ConstraintKind::inequality,
             ConstraintTag::gen_p_min, bus.id);
        emit(inequalities, psi, g.q_max - bus.q_demand, ConstraintKind::inequality,
             ConstraintTag::gen_q_max, bus.id);
        emit(inequalities, neg_psi, bus.q_demand - g.q_min, ConstraintKind::inequality,
             ConstraintTag::gen_q_min, bus.id);
    }
    for (int i = 0; i < n; ++i) {
        const Bus& bus = model.buses[i];
        if (bus.v_fixed && options.vfixed_as_equality) continue;
        HermitianMatrix neg_m(-inj[i].m_mag.matrix());
        emit(inequalities, inj[i].m_mag, bus.v_max * bus.v_max, ConstraintKind::inequality,
             ConstraintTag::vmag_max, bus.id);
        emit(inequalities, neg_m, -bus.v_min * bus.v_min, ConstraintKind::inequality,
             ConstraintTag::vmag_min, bus.id);
    }

    problem.m = static_cast<int>(equalities.size());
    problem.ell = static_cast<int>(inequalities.size());
    problem.constraints = std::move(equalities);
    problem.constraints.insert(problem.constraints.end(),
                               std::make_move_iterator(inequalities.begin()),
                               std::make_move_iterator(inequalities.end()));

    Eigen::MatrixXcd objective = Eigen::MatrixXcd::Zero(n, n);
    double offset = 0.0;
    for (const Generator& g : model.generators) {
        objective += g.c1 * inj[g.bus].phi.matrix();
        offset += g.c0 + g.c1 * model.buses[g.bus].p_demand;
    }
    problem.c = HermitianMatrix::from_symmetric_parts(objective);
    problem.cost_offset = offset;
    return problem;
}

/// Thrown when a linearly dependent equality row carries a right-hand side
/// inconsistent with the rows it depends on.
struct InconsistentEqualities : std::runtime_error {
    explicit InconsistentEqualities(const std::string& msg) : std::runtime_error(msg) {}
};

/// Reduces the equality block to a linearly independent basis, dropping
/// dependent rows whose right-hand side is implied by the retained ones.
inline SdpProblem equality_basis(const SdpProblem& problem, double tol_rel = kDefaultIndepTol) {
    std::vector<HermitianMatrix> eq;
    eq.reserve(problem.m);
    for (int k = 0; k < problem.m; ++k) eq.push_back(problem.row(k).a);
    IndependenceResult indep = independent_subset(eq, tol_rel);
    if (indep.all_independent) return problem;

    const Eigen::Index dim = static_cast<Eigen::Index>(problem.n) * problem.n;
    Eigen::MatrixXd basis_cols(dim, indep.basis.size());
    Eigen::VectorXd basis_rhs(static_cast<Eigen::Index>(indep.basis.size()));
    for (std::size_t j = 0; j < indep.basis.size(); ++j) {
        basis_cols.col(static_cast<Eigen::Index>(j)) = vec(eq[indep.basis[j]]);
        basis_rhs[static_cast<Eigen::Index>(j)] = problem.row(indep.basis[j]).b;
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(basis_cols);

    std::vector<bool> keep(problem.m, false);
    for (int idx : indep.basis) keep[static_cast<std::size_t>(idx)] = true;
    for (int k = 0; k < problem.m; ++k) {
        if (keep[static_cast<std::size_t>(k)]) continue;
        const Eigen::VectorXd coeffs = qr.solve(vec(eq[k]));
        const double implied = coeffs.dot(basis_rhs);
        if (std::abs(problem.row(k).b - implied) > 1e-8 * (1.0 + std::abs(problem.row(k).b))) {
            throw InconsistentEqualities("equality row " + std::to_string(k) + " (" +
                                         problem.row(k).label() +
                                         ") depends on earlier rows but its right-hand side " +
                                         std::to_string(problem.row(k).b) +
                                         " contradicts the implied value " +
                                         std::to_string(implied));
        }
    }

    SdpProblem reduced = problem;
    reduced.constraints.clear();
    for (int k = 0; k < problem.m; ++k) {
        if (keep[static_cast<std::size_t>(k)]) reduced.constraints.push_back(problem.row(k));
    }
    reduced.m = static_cast<int>(reduced.constraints.size());
    for (int k = problem.m; k < problem.m + problem.ell; ++k) {
        reduced.constraints.push_back(problem.row(k));
    }
    return reduced;
}

/// Debug dump with matrices in the lower-triangular vec layout.
inline nlohmann::json problem_to_json(const SdpProblem& problem) {
    auto vec_json = [](const HermitianMatrix& a) {
        const Eigen::VectorXd v = vec(a);
        return std::vector<double>(v.data(), v.data() + v.size());
    };
    nlohmann::json doc;
    doc["n"] = problem.n;
    doc["m"] = problem.m;
    doc["ell"] = problem.ell;
    doc["cost_offset"] = problem.cost_offset;
    doc["n_gen"] = problem.n_gen;
    doc["n_vfixed"] = problem.n_vfixed;
    doc["C"] = vec_json(problem.c);
    doc["constraints"] = nlohmann::json::array();
    for (const SdpConstraint& row : problem.constraints) {
        doc["constraints"].push_back(
            {{"label", row.label()},
             {"kind", row.kind == ConstraintKind::equality ? "equality" : "inequality"},
             {"b", row.b},
             {"A", vec_json(row.a)}});
    }
    return doc;
}

}  // namespace opfcert
