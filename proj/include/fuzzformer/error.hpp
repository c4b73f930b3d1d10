#pragma once

#include <stdexcept>
#include <string>

namespace fuzzformer {

/// Root of the library's exception hierarchy.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Tensor shapes disagree with what an operation requires.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// NaN or Inf produced inside a computation.
class NonFiniteError : public Error {
public:
    using Error::Error;
};

/// A covariance (or pooled covariance) failed Cholesky factorization.
class PositiveDefiniteError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

/// Malformed or inconsistent input data (CSV, manifests, caches).
class DataError : public Error {
public:
    using Error::Error;
};

class FetchError : public DataError {
public:
    using DataError::DataError;
};

/// Least-squares estimation could not produce coefficients.
class FitError : public Error {
public:
    using Error::Error;
};

}  // namespace fuzzformer
