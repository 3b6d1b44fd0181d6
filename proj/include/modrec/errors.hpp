#pragma once

#include <stdexcept>
#include <string>

namespace modrec {

// Base class for all errors thrown by this library. The CLI maps any
// Error to exit code 1 with a one-line diagnostic.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Element count does not match the requested shape.
struct SizeError : Error {
    using Error::Error;
};

// Operand shapes are incompatible for the requested operation.
struct ShapeError : Error {
    using Error::Error;
};

// Invalid configuration value or inconsistent spec.
struct ConfigError : Error {
    using Error::Error;
};

// An operation was called outside its contract (empty input, non-scalar
// loss, ...).
struct ContractError : Error {
    using Error::Error;
};

// Non-finite value where a finite one is required.
struct NumericsError : Error {
    using Error::Error;
};

// Out-of-range index (class label, missing SNR, ...).
struct IndexError : Error {
    using Error::Error;
};

// Filesystem-level failure (unwritable path, short write, ...).
struct IoError : Error {
    using Error::Error;
};

// Malformed dataset/model file contents.
struct FormatError : Error {
    using Error::Error;
};

}  // namespace modrec
