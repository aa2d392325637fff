#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

// Numeric precision: double by default (all tests and gradient checks run in
// this mode). Define SINET_REAL_FLOAT for the fast single-precision build.
// Define SINET_NO_FINITE_CHECKS (implied by NDEBUG) to skip per-op NaN/Inf
// validation.

namespace sinet {

#ifdef SINET_REAL_FLOAT
using Real = float;
#else
using Real = double;
#endif

#if defined(NDEBUG) && !defined(SINET_FORCE_FINITE_CHECKS)
#define SINET_NO_FINITE_CHECKS 1
#endif

enum class ErrorKind {
    Shape,       // tensor/parameter dimension mismatch
    Config,      // invalid configuration value or unknown key
    Io,          // file system / codec failure
    Validation,  // bad input data (non-binary mask, missing files, ...)
    State,       // illegal object state (e.g. consumed tape)
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
    throw Error(kind, message);
}

inline void require(bool ok, ErrorKind kind, const std::string& message) {
    if (!ok) fail(kind, message);
}

inline bool is_finite(Real v) { return std::isfinite(static_cast<double>(v)); }

} // namespace sinet
