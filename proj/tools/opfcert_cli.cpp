// Copyright (c) opfcert contributors
// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end: parse a case, build and solve its semidefinite
// relaxation, certify exactness properties, or sweep a demand grid.
//
// Exit codes: 0 success, 1 usage/parse error, 2 infeasibility suspected,
// 3 numerical failure or iteration cap, 4 certified rank-one exclusion,
// 5 sweep invariant violations.

#include <opfcert/casefile.hpp>
#include <opfcert/certify.hpp>
#include <opfcert/relaxation.hpp>
#include <opfcert/solver.hpp>
#include <opfcert/sweep.hpp>

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace {

using namespace opfcert;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitInfeasible = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitInexact = 4;
constexpr int kExitSweepViolation = 5;

std::string fmt9(double v) {
    char buffer[64];
    std::snprintf(buffer, sizeof(buffer), "%.9g", v);
    return buffer;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::stringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << content;
}

struct CommonOptions {
    std::string case_path;
    std::string format = "auto";
    double gap_tol = 1e-8;
    double feas_tol = 1e-8;
    int max_iters = 200;
    double rank_tol = kDefaultRankTol;
    double active_tol = 1e-6;
    double indep_tol = kDefaultIndepTol;
    bool verbose = false;
    std::string out_path;

    void attach(CLI::App* cmd, bool with_case = true) {
        cmd->set_config("--config", "", "read option defaults from an INI/TOML file");
        if (with_case) {
            cmd->add_option("case", case_path, "case file (JSON or MATPOWER subset)")
                ->required();
        }
        cmd->add_option("--format", format, "case format: auto, json, matpower")
            ->check(CLI::IsMember({"auto", "json", "matpower"}));
        cmd->add_option("--gap-tol", gap_tol, "relative duality-gap tolerance");
        cmd->add_option("--feas-tol", feas_tol, "feasibility tolerance");
        cmd->add_option("--max-iters", max_iters, "interior-point iteration cap");
        cmd->add_option("--rank-tol", rank_tol, "relative eigenvalue threshold for ranks");
        cmd->add_option("--active-tol", active_tol, "slack threshold for active inequalities");
        cmd->add_option("--indep-tol", indep_tol, "singular-value ratio for independence");
        cmd->add_flag("-v,--verbose", verbose, "log interior-point iterations to stderr");
        cmd->add_option("--out", out_path, "output artifact path");
    }

    CaseModel load() const {
        const std::string text = read_file(case_path);
        CaseFormat fmt = format == "json"       ? CaseFormat::json
                         : format == "matpower" ? CaseFormat::matpower
                                                : detect_format(text);
        CaseModel model = parse_case(text, fmt);
        for (const std::string& warning : model.warnings) {
            std::cerr << "warning: " << warning << "\n";
        }
        return model;
    }

    SolverConfig solver_config() const {
        SolverConfig config;
        config.gap_tol = gap_tol;
        config.feas_tol = feas_tol;
        config.max_iters = max_iters;
        config.iteration_log = verbose ? &std::cerr : nullptr;
        return config;
    }

    CertifyTolerances certify_tolerances() const {
        return CertifyTolerances{rank_tol, active_tol, indep_tol};
    }
};

int status_exit_code(SolveStatus status) {
    switch (status) {
        case SolveStatus::optimal: return kExitOk;
        case SolveStatus::primal_infeasible_suspected:
        case SolveStatus::dual_infeasible_suspected: return kExitInfeasible;
        case SolveStatus::max_iters:
        case SolveStatus::numerical_failure: return kExitNumerical;
    }
    return kExitNumerical;
}

nlohmann::json solution_to_json(const SdpProblem& problem, const SdpSolution& sol) {
    const Eigen::VectorXd x_vec = vec(sol.X);
    nlohmann::json doc{
        {"status", status_name(sol.status)},
        {"objective", sol.primal_obj + problem.cost_offset},
        {"primal_obj", sol.primal_obj},
        {"dual_obj", sol.dual_obj},
        {"cost_offset", problem.cost_offset},
        {"iterations", sol.iterations},
        {"n", problem.n},
        {"m", problem.m},
        {"ell", problem.ell},
        {"residuals",
         {{"primal_feas", sol.residuals.primal_feas},
          {"dual_feas", sol.residuals.dual_feas},
          {"rel_gap", sol.residuals.rel_gap}}},
        {"y", std::vector<double>(sol.y.data(), sol.y.data() + sol.y.size())},
        {"slacks", std::vector<double>(sol.slacks.data(), sol.slacks.data() + sol.slacks.size())},
        {"X", std::vector<double>(x_vec.data(), x_vec.data() + x_vec.size())},
    };
    if (!sol.diagnostic.empty()) doc["diagnostic"] = sol.diagnostic;
    return doc;
}

int cmd_solve(const CommonOptions& options, bool dump_problem) {
    CaseModel model = options.load();
    SdpProblem problem = equality_basis(build_sdp(model));
    if (dump_problem && !options.out_path.empty()) {
        write_file(options.out_path, problem_to_json(problem).dump(2) + "\n");
        std::cout << "wrote problem dump to " << options.out_path << "\n";
        return kExitOk;
    }
    SdpSolution sol = solve(problem, options.solver_config());
    std::cout << "status      " << status_name(sol.status) << "\n";
    std::cout << "objective   " << fmt9(sol.primal_obj + problem.cost_offset) << "\n";
    std::cout << "primal_obj  " << fmt9(sol.primal_obj) << "\n";
    std::cout << "dual_obj    " << fmt9(sol.dual_obj) << "\n";
    std::cout << "iterations  " << sol.iterations << "\n";
    std::cout << "primal_feas " << fmt9(sol.residuals.primal_feas) << "\n";
    std::cout << "dual_feas   " << fmt9(sol.residuals.dual_feas) << "\n";
    std::cout << "rel_gap     " << fmt9(sol.residuals.rel_gap) << "\n";
    if (!sol.diagnostic.empty()) std::cout << "diagnostic  " << sol.diagnostic << "\n";
    if (!options.out_path.empty()) {
        write_file(options.out_path, solution_to_json(problem, sol).dump(2) + "\n");
    }
    return status_exit_code(sol.status);
}

int cmd_certify(const CommonOptions& options) {
    CaseModel model = options.load();
    SdpProblem problem = equality_basis(build_sdp(model));
    SdpSolution sol = solve(problem, options.solver_config());
    if (sol.status != SolveStatus::optimal) {
        std::cout << "solve did not reach optimality: " << status_name(sol.status) << "\n";
        if (!sol.diagnostic.empty()) std::cout << sol.diagnostic << "\n";
        return status_exit_code(sol.status);
    }
    CertificateReport report = certify(problem, sol, options.certify_tolerances());
    std::cout << report_table_header() << "\n" << report_table_row(report) << "\n";
    std::cout << "objective " << fmt9(sol.primal_obj + problem.cost_offset)
              << "  strict_complementarity " << (report.strict_complementarity ? "yes" : "no")
              << "  corollary1 " << (report.corollary1_condition ? "yes" : "no")
              << "  corollary3 " << (report.corollary3_condition ? "yes" : "no") << "\n";
    for (const std::string& warning : report.warnings) {
        std::cout << "warning: " << warning << "\n";
    }
    if (!options.out_path.empty()) {
        write_file(options.out_path, report_to_json(report).dump(2) + "\n");
    }
    return report.theorem2_verdict == InexactnessVerdict::inexact_certified ? kExitInexact
                                                                            : kExitOk;
}

struct SweepOptions {
    std::string buses_csv;
    std::string range = "0:3";
    int points = 10;
    int workers = 0;
    bool oversat = false;
};

int cmd_sweep(const CommonOptions& options, const SweepOptions& sweep_options) {
    SweepSpec spec;
    spec.case_model = options.load();
    for (const std::string& token : CLI::detail::split(sweep_options.buses_csv, ',')) {
        if (!token.empty()) spec.swept_buses.push_back(std::stoi(token));
    }
    const auto colon = sweep_options.range.find(':');
    if (colon == std::string::npos) {
        throw CLI::ValidationError("--range", "expected lo:hi");
    }
    spec.range_low = std::stod(sweep_options.range.substr(0, colon));
    spec.range_high = std::stod(sweep_options.range.substr(colon + 1));
    spec.points_per_axis = sweep_options.points;
    spec.workers = sweep_options.workers;
    spec.oversat_crosscheck = sweep_options.oversat;
    spec.solver = options.solver_config();
    spec.solver.iteration_log = nullptr;  // per-instance logs would interleave
    spec.certify_tols = options.certify_tolerances();
    spec.validate();

    SweepResult result = run_sweep(spec);
    const std::string prefix = options.out_path.empty() ? "sweep" : options.out_path;
    write_file(prefix + ".csv", records_to_csv(result, spec));
    write_file(prefix + "_summary.json", summary_to_json(result.summary).dump(2) + "\n");

    const SweepSummary& s = result.summary;
    std::cout << "records " << s.total << "  R1 " << s.r1 << "  R2 " << s.r2 << "  degenerate "
              << s.degenerate << "  infeasible " << s.infeasible << "  failed " << s.failed
              << "\n";
    std::cout << "r1_fraction " << fmt9(s.fraction(s.r1)) << "  r2_fraction "
              << fmt9(s.fraction(s.r2)) << "  violations " << s.violation_count << "\n";
    std::cout << "wrote " << prefix << ".csv and " << prefix << "_summary.json\n";
    return s.violation_count == 0 ? kExitOk : kExitSweepViolation;
}

int cmd_report(const std::vector<std::string>& paths) {
    std::cout << report_table_header() << "\n";
    for (const std::string& path : paths) {
        CertificateReport report = report_from_json(nlohmann::json::parse(read_file(path)));
        std::cout << report_table_row(report) << "\n";
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"semidefinite relaxation of AC optimal power flow with "
                 "exactness certificates"};
    app.require_subcommand(1);

    CommonOptions solve_options;
    CLI::App* solve_cmd = app.add_subcommand("solve", "solve the relaxation of a case");
    solve_options.attach(solve_cmd);
    bool dump_problem = false;
    solve_cmd->add_flag("--dump-problem", dump_problem,
                        "write the assembled problem as JSON instead of solving");

    CommonOptions certify_options;
    CLI::App* certify_cmd =
        app.add_subcommand("certify", "solve and certify rank/nondegeneracy properties");
    certify_options.attach(certify_cmd);

    CommonOptions sweep_common;
    SweepOptions sweep_options;
    CLI::App* sweep_cmd = app.add_subcommand("sweep", "grid a demand box and classify each point");
    sweep_common.attach(sweep_cmd);
    sweep_cmd->add_option("--buses", sweep_options.buses_csv, "swept bus ids, comma separated")
        ->required();
    sweep_cmd->add_option("--range", sweep_options.range, "demand range lo:hi in MW");
    sweep_cmd->add_option("--points", sweep_options.points, "grid points per axis");
    sweep_cmd->add_option("--workers", sweep_options.workers, "worker threads (0 = all cores)")
        ->envname("OPFCERT_WORKERS");
    sweep_cmd->add_flag("--oversat-crosscheck", sweep_options.oversat,
                        "re-solve each classified point with load oversatisfaction");

    std::vector<std::string> report_paths;
    CLI::App* report_cmd =
        app.add_subcommand("report", "combine saved certificate reports into one table");
    report_cmd->add_option("reports", report_paths, "certificate report JSON files")
        ->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (solve_cmd->parsed()) return cmd_solve(solve_options, dump_problem);
        if (certify_cmd->parsed()) return cmd_certify(certify_options);
        if (sweep_cmd->parsed()) return cmd_sweep(sweep_common, sweep_options);
        if (report_cmd->parsed()) return cmd_report(report_paths);
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const SemanticError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const InconsistentEqualities& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInfeasible;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }
    return kExitUsage;
}
