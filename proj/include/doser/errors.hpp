#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace doser {

/// Rejected input: a caller violated a precondition (bad shape, bad range).
struct InputError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Filesystem / serialization failure. Message carries the offending path.
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Numerical failure (non-convergence, singular input).
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Training diverged (non-finite loss or gradient). Carries the step index.
struct TrainingError : std::runtime_error {
    size_t step;
    TrainingError(const std::string& msg, size_t step_index)
        : std::runtime_error(msg + " (step " + std::to_string(step_index) + ")"), step(step_index) {}
};

/// An object was used before it was trained or calibrated.
struct StateError : std::logic_error {
    using std::logic_error::logic_error;
};

/// Command-line misuse (unknown flag, unknown config key).
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace doser
