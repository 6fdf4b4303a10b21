#pragma once

#include <stdexcept>
#include <string>

namespace wavecouple {

/// Base class of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A field or state carries non-finite coefficients, or has the wrong length.
class InvalidField : public Error {
public:
    using Error::Error;
};

/// An operation was called outside its documented domain.
class DomainError : public Error {
public:
    using Error::Error;
};

/// Experiment configuration rejected at load or validation time.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Every trajectory of a Monte-Carlo run was excluded.
class EstimationFailure : public Error {
public:
    using Error::Error;
};

/// The requested operation needs a capability the test functional lacks.
class UnsupportedFunctional : public Error {
public:
    using Error::Error;
};

} // namespace wavecouple
