#pragma once

#include <stdexcept>
#include <string>

namespace dlm {

/// Base class for every error raised by the library. The CLI maps the
/// concrete subclasses onto its exit-code taxonomy.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid or inconsistent configuration (unknown component, missing key).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Bad input data: unparseable cells, non-uniform time steps, NaN values.
class DataError : public Error {
public:
    using Error::Error;
};

/// Matrix dimensions that do not agree.
class DimensionError : public Error {
public:
    using Error::Error;
};

/// A parameter value outside its admissible domain.
class DomainError : public Error {
public:
    using Error::Error;
};

/// Factorization failures and other floating-point breakdowns.
class NumericalError : public Error {
public:
    using Error::Error;
};

/// The starting point of an optimization or MCMC run is unusable
/// (non-finite likelihood or zero prior mass).
class InitializationError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

}  // namespace dlm
