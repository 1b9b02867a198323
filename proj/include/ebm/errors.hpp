#pragma once

#include <stdexcept>
#include <string>

namespace ebm {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Shape of an argument does not match the model.
struct DimensionError : Error {
    using Error::Error;
};

// A structural invariant (symmetry, zero diagonal, value domain) is violated.
struct InvariantError : Error {
    using Error::Error;
};

// Operation is not defined for the requested unit family.
struct UnsupportedFamilyError : Error {
    using Error::Error;
};

// Exact enumeration was requested beyond the configured state-space cap.
struct CapacityError : Error {
    using Error::Error;
};

// A file could not be parsed; the message names the offending field.
struct ParseError : Error {
    using Error::Error;
};

// A file was written by an incompatible format version.
struct VersionError : Error {
    using Error::Error;
};

// Input data fails validation (domain mismatch, bad CSV row, bad flag combination).
struct ValidationError : Error {
    using Error::Error;
};

} // namespace ebm
