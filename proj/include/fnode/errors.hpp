#pragma once

#include <stdexcept>
#include <string>

namespace fnode {

/// Bad arguments or malformed data fed into the library (precondition breaks,
/// shape mismatches, out-of-range orders). Maps to CLI exit code 2 when it
/// originates from user-supplied configuration.
struct InvalidInputError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct ShapeError : InvalidInputError {
    using InvalidInputError::InvalidInputError;
};

struct UnsupportedOrderError : InvalidInputError {
    using InvalidInputError::InvalidInputError;
};

/// Configuration file / schema problems. Maps to CLI exit code 2.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Runtime numerical failures (Cholesky breakdown, non-finite states, ...).
/// Maps to CLI exit code 3.
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// A trajectory left the finite range during integration or generation.
struct DivergenceError : NumericalError {
    DivergenceError(const std::string& msg, double last_good_time)
        : NumericalError(msg), last_good_time(last_good_time) {}
    double last_good_time = 0.0;
};

/// Step budget exhausted before reaching the end time.
struct BudgetError : NumericalError {
    using NumericalError::NumericalError;
};

/// Internal consistency checks (e.g. imaginary residue after an inverse
/// transform of what should be a real field). Indicates a bug, not bad input.
struct InternalError : std::logic_error {
    using std::logic_error::logic_error;
};

}  // namespace fnode
