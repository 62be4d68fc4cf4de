#pragma once

#include <string>
#include <vector>

#include "gsmp/harness/config.hpp"

namespace gsmp::harness {

struct InvariantRow {
    std::string suite;
    std::string name;
    /// The mathematical statement the row checks.
    std::string anchor;
    double value = 0.0;
    double threshold = 0.0;
    bool passed = false;
};

/// Known suite names in run order.
[[nodiscard]] const std::vector<std::string>& invariant_suites();

/// Runs one suite, or every suite when `suite` is empty.
[[nodiscard]] std::vector<InvariantRow> run_invariants(const ExperimentConfig& config, const std::string& suite);

}  // namespace gsmp::harness
