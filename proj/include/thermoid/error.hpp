#pragma once

#include <stdexcept>
#include <string>

namespace thermoid {

/// Base class for every error raised by the library. The CLI maps the
/// concrete subclass to a process exit code.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad configuration, bad arguments, unknown column names.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Input data that cannot be used: unreadable files, too few rows,
/// header mismatches.
class DataError : public Error {
public:
    using Error::Error;
};

/// Numerical failure: rank deficiency, divergence, degenerate inputs.
class NumericalError : public Error {
public:
    using Error::Error;
};

} // namespace thermoid
