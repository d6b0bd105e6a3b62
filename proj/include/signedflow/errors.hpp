#pragma once

#include <stdexcept>
#include <string>

namespace signedflow {

/// Malformed or inconsistent scenario input (CLI exit code 2).
struct ScenarioError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Combinatorial size cap hit, e.g. too many SCCs for the in-isolated-set
/// enumeration or too many nodes for partition enumeration (CLI exit code 3).
struct CapExceeded : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Integration failure: divergence, runtime-monitor violation or a bad gain
/// evaluation (CLI exit code 4).
struct IntegratorError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Eigen-solver breakdown or a degenerate normalization.
struct NumericalFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace signedflow
