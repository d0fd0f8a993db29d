// Copyright (c) opfcert contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>
#include <json.hpp>

#include <algorithm>
#include <complex>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace opfcert {

/// Syntax-level failure; line/column refer to the input text.
struct ParseError : std::runtime_error {
    ParseError(const std::string& msg, int line_, int column_)
        : std::runtime_error("parse error at line " + std::to_string(line_) + ", column " +
                             std::to_string(column_) + ": " + msg),
          line(line_),
          column(column_) {}
    int line;
    int column;
};

/// Structurally valid input that violates a model invariant (dangling bus
/// reference, inverted voltage band, ...).
struct SemanticError : std::runtime_error {
    explicit SemanticError(const std::string& msg) : std::runtime_error(msg) {}
};

struct Bus {
    int id = 0;  // external 1-based id as written in the file
    double p_demand = 0.0;  // per-unit after normalization
    double q_demand = 0.0;
    double v_min = 0.0;
    double v_max = 0.0;
    std::optional<double> v_fixed;
};

struct Branch {
    int from_bus = 0;  // internal 0-based indices
    int to_bus = 0;
    double series_resistance = 0.0;
    double series_reactance = 0.0;
    double total_shunt_susceptance = 0.0;
    double tap_ratio = 1.0;
};

struct Generator {
    int bus = 0;  // internal 0-based index
    double p_min = 0.0;
    double p_max = 0.0;
    double q_min = 0.0;
    double q_max = 0.0;
    double c1 = 0.0;  // $/pu after normalization
    double c0 = 0.0;
};

/// Immutable network snapshot in per-unit. Generators are merged so there is
/// at most one per bus; demands and generation bounds are divided by
/// base_mva, linear cost coefficients multiplied by it (so c1 * P_pu equals
/// the original $/MW price times MW).
struct CaseModel {
    std::vector<Bus> buses;
    std::vector<Branch> branches;
    std::vector<Generator> generators;  // sorted by bus index, one per bus
    double base_mva = 100.0;
    std::vector<std::string> warnings;

    int n() const { return static_cast<int>(buses.size()); }
    int n_gen() const { return static_cast<int>(generators.size()); }

    int n_vfixed() const {
        int count = 0;
        for (const Bus& b : buses) count += b.v_fixed.has_value() ? 1 : 0;
        return count;
    }

    std::vector<int> generator_buses() const {
        std::vector<int> out;
        out.reserve(generators.size());
        for (const Generator& g : generators) out.push_back(g.bus);
        return out;
    }

    std::vector<int> vfixed_buses() const {
        std::vector<int> out;
        for (int i = 0; i < n(); ++i) {
            if (buses[i].v_fixed) out.push_back(i);
        }
        return out;
    }

    bool is_gen_bus(int internal) const {
        for (const Generator& g : generators) {
            if (g.bus == internal) return true;
        }
        return false;
    }

    const Generator* generator_at(int internal) const {
        for (const Generator& g : generators) {
            if (g.bus == internal) return &g;
        }
        return nullptr;
    }

    int internal_index(int external_id) const {
        for (int i = 0; i < n(); ++i) {
            if (buses[i].id == external_id) return i;
        }
        throw SemanticError("unknown bus id " + std::to_string(external_id));
    }
};

enum class CaseFormat { json, matpower };

inline CaseFormat detect_format(const std::string& text) {
    for (char c : text) {
        if (std::isspace(static_cast<unsigned char>(c))) continue;
        return c == '{' ? CaseFormat::json : CaseFormat::matpower;
    }
    return CaseFormat::json;
}

namespace detail {

inline std::pair<int, int> line_column_of(const std::string& text, std::size_t byte) {
    int line = 1;
    int column = 1;
    for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
        if (text[i] == '\n') {
            ++line;
            column = 1;
        } else {
            ++column;
        }
    }
    return {line, column};
}

inline void validate_and_finish(CaseModel& model) {
    if (model.buses.empty()) throw SemanticError("case has no buses");
    if (model.base_mva <= 0.0) throw SemanticError("base_mva must be positive");

    std::map<int, int> seen;
    for (int i = 0; i < model.n(); ++i) {
        const Bus& b = model.buses[i];
        if (seen.count(b.id)) throw SemanticError("duplicate bus id " + std::to_string(b.id));
        seen[b.id] = i;
        if (b.v_min <= 0.0 || b.v_max <= 0.0) {
            throw SemanticError("bus " + std::to_string(b.id) + ": voltage bounds must be positive");
        }
        if (b.v_min > b.v_max) {
            throw SemanticError("bus " + std::to_string(b.id) + ": v_min exceeds v_max");
        }
        if (b.v_fixed && (*b.v_fixed < b.v_min || *b.v_fixed > b.v_max)) {
            throw SemanticError("bus " + std::to_string(b.id) +
                                ": fixed voltage magnitude outside [v_min, v_max]");
        }
    }
    for (const Branch& br : model.branches) {
        if (br.from_bus < 0 || br.from_bus >= model.n() || br.to_bus < 0 ||
            br.to_bus >= model.n()) {
            throw SemanticError("branch references a nonexistent bus");
        }
        if (br.from_bus == br.to_bus) throw SemanticError("branch connects a bus to itself");
        if (br.series_resistance == 0.0 && br.series_reactance == 0.0) {
            throw SemanticError("branch with zero series impedance");
        }
        if (br.tap_ratio <= 0.0) throw SemanticError("branch tap ratio must be positive");
    }

    // Merge generators sharing a bus: bounds add, c1 averages weighted by
    // p_max, fixed costs add.
    std::map<int, std::vector<Generator>> by_bus;
    for (const Generator& g : model.generators) {
        if (g.bus < 0 || g.bus >= model.n()) {
            throw SemanticError("generator references a nonexistent bus");
        }
        if (g.p_min > g.p_max || g.q_min > g.q_max) {
            throw SemanticError("generator at bus " + std::to_string(model.buses[g.bus].id) +
                                ": inverted bounds");
        }
        if (g.c1 < 0.0 || g.c0 < 0.0) {
            throw SemanticError("generator at bus " + std::to_string(model.buses[g.bus].id) +
                                ": cost coefficients must be non-negative");
        }
        by_bus[g.bus].push_back(g);
    }
    std::vector<Generator> merged;
    merged.reserve(by_bus.size());
    for (auto& [bus, group] : by_bus) {
        Generator total;
        total.bus = bus;
        double weight = 0.0;
        double weighted_c1 = 0.0;
        for (const Generator& g : group) {
            total.p_min += g.p_min;
            total.p_max += g.p_max;
            total.q_min += g.q_min;
            total.q_max += g.q_max;
            total.c0 += g.c0;
            weighted_c1 += g.c1 * g.p_max;
            weight += g.p_max;
        }
        if (weight > 0.0) {
            total.c1 = weighted_c1 / weight;
        } else {
            double sum = 0.0;
            for (const Generator& g : group) sum += g.c1;
            total.c1 = sum / static_cast<double>(group.size());
        }
        if (group.size() > 1) {
            model.warnings.push_back("merged " + std::to_string(group.size()) +
                                     " generators at bus " + std::to_string(model.buses[bus].id));
        }
        merged.push_back(total);
    }
    model.generators = std::move(merged);
}

inline CaseModel parse_case_json(const std::string& text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        auto [line, column] = line_column_of(text, e.byte > 0 ? e.byte - 1 : 0);
        throw ParseError(e.what(), line, column);
    }

    CaseModel model;
    try {
        model.base_mva = doc.value("base_mva", 100.0);
        const double base = model.base_mva;

        std::map<int, int> id_to_index;
        for (const auto& jb : doc.at("buses")) {
            Bus b;
            b.id = jb.at("id").get<int>();
            b.p_demand = jb.value("pd", 0.0) / base;
            b.q_demand = jb.value("qd", 0.0) / base;
            b.v_min = jb.value("vmin", 0.9);
            b.v_max = jb.value("vmax", 1.1);
            if (jb.contains("vfixed") && !jb["vfixed"].is_null()) {
                b.v_fixed = jb["vfixed"].get<double>();
            }
            id_to_index[b.id] = static_cast<int>(model.buses.size());
            model.buses.push_back(b);
        }
        auto resolve = [&](int id) {
            auto it = id_to_index.find(id);
            if (it == id_to_index.end()) {
                throw SemanticError("reference to nonexistent bus " + std::to_string(id));
            }
            return it->second;
        };
        if (doc.contains("branches")) {
            for (const auto& jb : doc["branches"]) {
                Branch br;
                br.from_bus = resolve(jb.at("from").get<int>());
                br.to_bus = resolve(jb.at("to").get<int>());
                br.series_resistance = jb.at("r").get<double>();
                br.series_reactance = jb.at("x").get<double>();
                br.total_shunt_susceptance = jb.value("b", 0.0);
                br.tap_ratio = jb.value("tap", 1.0);
                model.branches.push_back(br);
            }
        }
        if (doc.contains("generators")) {
            for (const auto& jg : doc["generators"]) {
                Generator g;
                g.bus = resolve(jg.at("bus").get<int>());
                g.p_min = jg.at("pmin").get<double>() / base;
                g.p_max = jg.at("pmax").get<double>() / base;
                g.q_min = jg.at("qmin").get<double>() / base;
                g.q_max = jg.at("qmax").get<double>() / base;
                g.c1 = jg.value("c1", 0.0) * base;
                g.c0 = jg.value("c0", 0.0);
                model.generators.push_back(g);
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw SemanticError(std::string("malformed case document: ") + e.what());
    }
    validate_and_finish(model);
    return model;
}

/// Minimal reader for the MATLAB-style matrix tables used by published OPF
/// cases: "mpc.<name> = [ rows ];" with % comments. Only bus, branch, gen,
/// gencost and baseMVA are consumed.
struct MatpowerTables {
    double base_mva = 100.0;
    bool base_seen = false;
    std::map<std::string, std::vector<std::vector<double>>> tables;
};

inline MatpowerTables scan_matpower(const std::string& text) {
    MatpowerTables out;
    std::istringstream stream(text);
    std::string line;
    int line_no = 0;
    std::string active_table;
    std::vector<std::vector<double>>* rows = nullptr;

    while (std::getline(stream, line)) {
        ++line_no;
        if (auto pos = line.find('%'); pos != std::string::npos) line.erase(pos);
        std::string trimmed = line;
        trimmed.erase(0, trimmed.find_first_not_of(" \t\r"));
        if (trimmed.empty()) continue;

        if (!rows) {
            if (trimmed.rfind("mpc.baseMVA", 0) == 0) {
                auto eq = trimmed.find('=');
                if (eq == std::string::npos) throw ParseError("expected '='", line_no, 1);
                std::string rhs = trimmed.substr(eq + 1);
                std::erase(rhs, ';');
                try {
                    out.base_mva = std::stod(rhs);
                } catch (const std::exception&) {
                    throw ParseError("invalid baseMVA value", line_no, static_cast<int>(eq) + 2);
                }
                out.base_seen = true;
                continue;
            }
            if (trimmed.rfind("mpc.", 0) == 0 && trimmed.find('[') != std::string::npos) {
                auto eq = trimmed.find('=');
                active_table = trimmed.substr(4, eq - 4);
                active_table.erase(active_table.find_last_not_of(" \t") + 1);
                rows = &out.tables[active_table];
                trimmed = trimmed.substr(trimmed.find('[') + 1);
            } else {
                continue;  // function header, version tag, unknown assignments
            }
        }

        // Inside a table: rows end at ';', the table at ']'.
        bool closed = false;
        if (auto pos = trimmed.find(']'); pos != std::string::npos) {
            trimmed = trimmed.substr(0, pos);
            closed = true;
        }
        std::string token;
        std::vector<double> row;
        std::istringstream cells(trimmed);
        while (cells >> token) {
            bool row_done = false;
            if (!token.empty() && token.back() == ';') {
                token.pop_back();
                row_done = true;
            }
            if (!token.empty()) {
                try {
                    row.push_back(std::stod(token));
                } catch (const std::exception&) {
                    throw ParseError("invalid number '" + token + "' in mpc." + active_table,
                                     line_no, 1);
                }
            }
            if (row_done && !row.empty()) {
                rows->push_back(row);
                row.clear();
            }
        }
        if (!row.empty()) rows->push_back(row);
        if (closed) rows = nullptr;
    }
    if (rows) throw ParseError("unterminated table mpc." + active_table, line_no, 1);
    return out;
}

inline CaseModel parse_case_matpower(const std::string& text) {
    MatpowerTables raw = scan_matpower(text);
    if (!raw.tables.count("bus")) throw SemanticError("missing mpc.bus table");

    CaseModel model;
    model.base_mva = raw.base_mva;
    if (!raw.base_seen) model.warnings.push_back("mpc.baseMVA missing, assuming 100");
    const double base = model.base_mva;

    std::map<int, int> id_to_index;
    for (const auto& row : raw.tables["bus"]) {
        if (row.size() < 13) throw SemanticError("mpc.bus row has fewer than 13 columns");
        Bus b;
        b.id = static_cast<int>(row[0]);
        b.p_demand = row[2] / base;
        b.q_demand = row[3] / base;
        if (row[4] != 0.0 || row[5] != 0.0) {
            model.warnings.push_back("bus " + std::to_string(b.id) +
                                     ": shunt Gs/Bs not modeled, ignored");
        }
        b.v_max = row[11];
        b.v_min = row[12];
        id_to_index[b.id] = static_cast<int>(model.buses.size());
        model.buses.push_back(b);
    }
    auto resolve = [&](double id) {
        auto it = id_to_index.find(static_cast<int>(id));
        if (it == id_to_index.end()) {
            throw SemanticError("reference to nonexistent bus " +
                                std::to_string(static_cast<int>(id)));
        }
        return it->second;
    };
    if (raw.tables.count("branch")) {
        for (const auto& row : raw.tables["branch"]) {
            if (row.size() < 11) throw SemanticError("mpc.branch row has fewer than 11 columns");
            if (row[10] == 0.0) continue;  // out of service
            Branch br;
            br.from_bus = resolve(row[0]);
            br.to_bus = resolve(row[1]);
            br.series_resistance = row[2];
            br.series_reactance = row[3];
            br.total_shunt_susceptance = row[4];
            br.tap_ratio = row[8] != 0.0 ? row[8] : 1.0;
            if (row[9] != 0.0) {
                model.warnings.push_back("branch " + std::to_string(static_cast<int>(row[0])) +
                                         "-" + std::to_string(static_cast<int>(row[1])) +
                                         ": phase shift not modeled, ignored");
            }
            model.branches.push_back(br);
        }
    }

    std::vector<Generator> gens;
    std::vector<bool> online;
    if (raw.tables.count("gen")) {
        for (const auto& row : raw.tables["gen"]) {
            if (row.size() < 10) throw SemanticError("mpc.gen row has fewer than 10 columns");
            online.push_back(row[7] > 0.0);
            Generator g;
            g.bus = resolve(row[0]);
            g.q_max = row[3] / base;
            g.q_min = row[4] / base;
            g.p_max = row[8] / base;
            g.p_min = row[9] / base;
            gens.push_back(g);
        }
    }
    if (raw.tables.count("gencost")) {
        const auto& costs = raw.tables["gencost"];
        std::size_t usable = costs.size();
        if (costs.size() == 2 * gens.size() && !gens.empty()) {
            model.warnings.push_back("reactive gencost rows present, ignored");
            usable = gens.size();
        } else if (costs.size() != gens.size()) {
            throw SemanticError("mpc.gencost row count does not match mpc.gen");
        }
        for (std::size_t i = 0; i < usable; ++i) {
            const auto& row = costs[i];
            if (row.size() < 4) throw SemanticError("mpc.gencost row has fewer than 4 columns");
            const int cost_model = static_cast<int>(row[0]);
            const int ncost = static_cast<int>(row[3]);
            if (cost_model != 2) {
                throw SemanticError("only polynomial gencost (model 2) is supported");
            }
            if (ncost > 2) {
                throw SemanticError("gencost polynomial of degree > 1 is not supported");
            }
            if (row.size() < 4 + static_cast<std::size_t>(ncost)) {
                throw SemanticError("mpc.gencost row shorter than its declared NCOST");
            }
            if (ncost == 2) {
                gens[i].c1 = row[4] * base;  // $/MW -> $/pu
                gens[i].c0 = row[5];
            } else if (ncost == 1) {
                gens[i].c0 = row[4];
            }
        }
    }
    for (std::size_t i = 0; i < gens.size(); ++i) {
        if (online.empty() || online[i]) model.generators.push_back(gens[i]);
    }

    validate_and_finish(model);
    return model;
}

}  // namespace detail

inline CaseModel parse_case(const std::string& text, CaseFormat format) {
    switch (format) {
        case CaseFormat::json:
            return detail::parse_case_json(text);
        case CaseFormat::matpower:
            return detail::parse_case_matpower(text);
    }
    throw std::invalid_argument("unsupported case format");
}

/// Serializes back to the native JSON schema (file units: MW, MVAr, $/MW).
inline std::string serialize_case(const CaseModel& model) {
    nlohmann::json doc;
    const double base = model.base_mva;
    doc["base_mva"] = base;
    doc["buses"] = nlohmann::json::array();
    for (const Bus& b : model.buses) {
        nlohmann::json jb{{"id", b.id},        {"pd", b.p_demand * base},
                          {"qd", b.q_demand * base}, {"vmin", b.v_min},
                          {"vmax", b.v_max}};
        if (b.v_fixed) jb["vfixed"] = *b.v_fixed;
        doc["buses"].push_back(jb);
    }
    doc["branches"] = nlohmann::json::array();
    for (const Branch& br : model.branches) {
        doc["branches"].push_back({{"from", model.buses[br.from_bus].id},
                                   {"to", model.buses[br.to_bus].id},
                                   {"r", br.series_resistance},
                                   {"x", br.series_reactance},
                                   {"b", br.total_shunt_susceptance},
                                   {"tap", br.tap_ratio}});
    }
    doc["generators"] = nlohmann::json::array();
    for (const Generator& g : model.generators) {
        doc["generators"].push_back({{"bus", model.buses[g.bus].id},
                                     {"pmin", g.p_min * base},
                                     {"pmax", g.p_max * base},
                                     {"qmin", g.q_min * base},
                                     {"qmax", g.q_max * base},
                                     {"c1", g.c1 / base},
                                     {"c0", g.c0}});
    }
    return doc.dump(2);
}

/// Bus admittance matrix from branch pi-models. Complex symmetric, not
/// Hermitian: Y_ff = y_s / tap^2 + j b/2, Y_tt = y_s + j b/2, off-diagonals
/// -y_s / tap, with y_s = 1 / (r + j x).
inline Eigen::MatrixXcd build_admittance(const CaseModel& model) {
    const int n = model.n();
    Eigen::MatrixXcd y = Eigen::MatrixXcd::Zero(n, n);
    for (const Branch& br : model.branches) {
        if (br.series_resistance == 0.0 && br.series_reactance == 0.0) {
            throw SemanticError("branch with zero series impedance");
        }
        const std::complex<double> y_series =
            1.0 / std::complex<double>(br.series_resistance, br.series_reactance);
        const std::complex<double> shunt(0.0, br.total_shunt_susceptance / 2.0);
        const double tap = br.tap_ratio;
        y(br.from_bus, br.from_bus) += y_series / (tap * tap) + shunt;
        y(br.to_bus, br.to_bus) += y_series + shunt;
        y(br.from_bus, br.to_bus) += -y_series / tap;
        y(br.to_bus, br.from_bus) += -y_series / tap;
    }
    return y;
}

}  // namespace opfcert
