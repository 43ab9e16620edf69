#pragma once

#include <stdexcept>
#include <string>

namespace emrdm {

// Error taxonomy mirrored by the CLI exit codes:
//   ConfigError -> 2, NumericError -> 3, IoError -> 4.
// Domain violations (negative t, sigma=0 divisions) use std::domain_error
// and map to the config class at the CLI boundary.

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ShapeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace emrdm
