#pragma once

#include <stdexcept>
#include <string>

namespace align {

// Error taxonomy; the CLI maps these onto exit codes.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Incompatible dimensions between operands.
struct ShapeError : Error {
    using Error::Error;
};

// Bad user-supplied parameter or config value.
struct ParameterError : Error {
    using Error::Error;
};

// An API contract was violated (stale cache, done-state query, ...).
struct ContractError : Error {
    using Error::Error;
};

// Training produced NaN/Inf loss.
struct DivergedError : Error {
    using Error::Error;
};

// File system problems.
struct IoError : Error {
    using Error::Error;
};

}  // namespace align
