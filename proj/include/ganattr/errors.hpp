#pragma once

#include <stdexcept>
#include <string>

namespace ganattr {

// Error taxonomy. The CLI maps these onto its exit-code contract:
// usage errors 1, data errors 2, compute errors 3.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Tensor or layer dimension mismatch.
struct ShapeError : Error {
    using Error::Error;
};

// API misuse: backward without a forward trace, training through a frozen
// module, out-of-order phase execution on a live object.
struct StateError : Error {
    using Error::Error;
};

// Argument outside its documented domain.
struct ValueError : Error {
    using Error::Error;
};

// Manifest or record-level schema violation.
struct DataError : Error {
    using Error::Error;
};

// Filesystem and codec failures.
struct IoError : Error {
    using Error::Error;
};

// Bundle container problems: bad magic, unknown version, truncation.
struct FormatError : Error {
    using Error::Error;
};

// Bundle payload does not match its content digest.
struct DigestError : FormatError {
    using FormatError::FormatError;
};

// A phase was requested before its prerequisite artifacts exist.
struct DependencyError : Error {
    using Error::Error;
};

// Numerical failure mid-run (NaN loss and friends).
struct ComputeError : Error {
    using Error::Error;
};

}  // namespace ganattr
