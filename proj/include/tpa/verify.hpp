#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace tpa {

struct PropertyResult {
    std::string suite;
    std::string name;
    bool passed = false;
    std::string detail;  // failure diagnostics, empty on pass
};

struct VerifyOptions {
    std::string filter;        // substring match on suite name; empty = all
    std::uint64_t seed = 0;    // drives every randomized fixture
    std::string inject_fault;  // named perturbation fixture, e.g. "corrupt-mask"
};

// Runs the module invariant suites and returns one result per property.
std::vector<PropertyResult> run_verify(const VerifyOptions& opts);

std::string verify_report_json(const std::vector<PropertyResult>& results);

}  // namespace tpa
