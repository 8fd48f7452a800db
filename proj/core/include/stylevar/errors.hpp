#pragma once

#include <stdexcept>
#include <string>

namespace stylevar {

/// Base class for all errors raised by this library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid input data: parse failures, schema violations, broken invariants,
/// violated preconditions. Maps to CLI exit code 1.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Network-level failure talking to a backend service (connect, timeout,
/// 5xx after exhausting retries). Maps to CLI exit code 2.
class TransportError : public Error {
public:
    using Error::Error;
};

}  // namespace stylevar
