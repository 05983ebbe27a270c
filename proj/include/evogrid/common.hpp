#pragma once

#include <stdexcept>
#include <string>

namespace evogrid {

/// Invalid or inconsistent configuration (CLI exit code 2).
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Corrupt or incompatible file content.
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Non-finite values encountered during training (CLI exit code 3).
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace evogrid
