#pragma once

#include <stdexcept>
#include <string>

namespace dnnci {

/// Base of every error raised by the library. `category()` is a stable,
/// machine-readable tag used by the command line runner.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
    virtual const char* category() const noexcept { return "error"; }
};

/// Inconsistent shapes: wrong input length, mismatched row counts, etc.
class DimensionError : public Error {
public:
    using Error::Error;
    const char* category() const noexcept override { return "dimension"; }
};

/// A value outside the domain an operation is defined on.
class DomainError : public Error {
public:
    using Error::Error;
    const char* category() const noexcept override { return "domain"; }
};

/// Malformed or inconsistent input data (files, treatment vectors, empty arms).
class DataError : public Error {
public:
    using Error::Error;
    const char* category() const noexcept override { return "data"; }
};

/// Non-finite losses, degenerate variances and similar numerical failures.
class NumericError : public Error {
public:
    using Error::Error;
    const char* category() const noexcept override { return "numeric"; }
};

/// Invalid user configuration.
class ConfigError : public Error {
public:
    using Error::Error;
    const char* category() const noexcept override { return "config"; }
};

namespace detail {

template <class E = DimensionError>
inline void require(bool ok, const std::string& what) {
    if (!ok) throw E(what);
}

}  // namespace detail
}  // namespace dnnci
