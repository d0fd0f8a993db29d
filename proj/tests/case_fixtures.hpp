// Copyright (c) opfcert contributors
// SPDX-License-Identifier: Apache-2.0
//
// Programmatic fixtures plus loading of the shipped case files.

#pragma once

#include <opfcert/casefile.hpp>

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace opfcert::test {

inline std::string case_dir() {
#ifdef OPFCERT_CASE_DIR
    return OPFCERT_CASE_DIR;
#else
    return "cases";
#endif
}

inline CaseModel load_case(const std::string& name) {
    const std::string path = case_dir() + "/" + name;
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open case file " + path);
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_case(buffer.str(), detect_format(buffer.str()));
}

/// One bus, one generator, fixed magnitude; the internal model from the
/// solved-by-hand example (demand 0.5 + 0.2j pu, c1 = 10 $/pu).
inline CaseModel one_bus_case() {
    CaseModel model;
    model.base_mva = 1.0;
    model.buses = {{1, 0.5, 0.2, 0.9, 1.1, 1.0}};
    model.generators = {{0, 0.0, 1.0, -0.5, 0.5, 10.0, 0.0}};
    return model;
}

/// Generator at bus 1, load at bus 2, one lossy line.
inline CaseModel two_bus_case() {
    CaseModel model;
    model.base_mva = 1.0;
    model.buses = {{1, 0.0, 0.0, 0.9, 1.1, std::nullopt},
                   {2, 0.5, 0.2, 0.9, 1.1, std::nullopt}};
    model.branches = {{0, 1, 0.05, 0.2, 0.0, 1.0}};
    model.generators = {{0, 0.0, 2.0, -1.0, 1.0, 10.0, 0.0}};
    return model;
}

/// Three buses, one generator, every magnitude pinned.
inline CaseModel three_bus_all_fixed() {
    CaseModel model;
    model.base_mva = 1.0;
    model.buses = {{1, 0.0, 0.0, 0.9, 1.1, 1.0},
                   {2, 0.3, 0.1, 0.9, 1.1, 1.0},
                   {3, 0.2, 0.05, 0.9, 1.1, 1.0}};
    model.branches = {{0, 1, 0.02, 0.1, 0.0, 1.0}, {1, 2, 0.03, 0.12, 0.0, 1.0}};
    model.generators = {{0, 0.0, 2.0, -1.0, 1.0, 10.0, 0.0}};
    return model;
}

}  // namespace opfcert::test
