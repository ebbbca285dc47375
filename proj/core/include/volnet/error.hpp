#pragma once

#include <stdexcept>
#include <string>

namespace volnet {

// Base of the library's exception hierarchy. The CLI maps subclasses to
// process exit codes, so new error kinds should subclass one of these.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Malformed configuration: unknown keys, bad values, impossible architectures.
struct ConfigError : Error {
    using Error::Error;
};

// Bad input data: parse failures, shape mismatches, degenerate datasets.
struct DataError : Error {
    using Error::Error;
};

// Tensor shape violations inside numeric code.
struct ShapeError : DataError {
    using DataError::DataError;
};

// Numerical failure at runtime (non-finite loss, divergence).
struct NumericError : Error {
    using Error::Error;
};

} // namespace volnet
