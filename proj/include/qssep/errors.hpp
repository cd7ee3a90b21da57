#pragma once

#include <stdexcept>
#include <string>

namespace qssep {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Malformed input: bad sizes, out-of-range indices, non-Hermitian data.
struct InvalidArgument : Error {
    using Error::Error;
};

/// Request exceeds a documented enumeration or memory limit.
struct SizeLimitError : Error {
    using Error::Error;
};

/// Input outside the mathematical domain of the operation.
struct DomainError : Error {
    using Error::Error;
};

struct NumericalBlowup : Error {
    using Error::Error;
};

struct ConvergenceError : Error {
    using Error::Error;
};

struct DegeneracyError : Error {
    using Error::Error;
};

inline void require(bool cond, const std::string& what) {
    if (!cond) throw InvalidArgument(what);
}

} // namespace qssep
