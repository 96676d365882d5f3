#pragma once

#include <stdexcept>
#include <string>

namespace phmadv {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not satisfy an operation's shape rule.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A precondition on a call was violated (non-scalar output, bad config, ...).
class ContractError : public Error {
 public:
  using Error::Error;
};

/// A variable was looked up on a tape it does not belong to.
class LookupError : public Error {
 public:
  using Error::Error;
};

/// NaN/Inf appeared where a finite value is required.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Covariance cannot be inverted without a positive regularizer.
class RegularizationError : public Error {
 public:
  using Error::Error;
};

/// A metric is undefined for the given input (e.g. a single-class set).
class UndefinedMetricError : public Error {
 public:
  using Error::Error;
};

/// Malformed input data. Messages carry the file and line where known.
class DataError : public Error {
 public:
  using Error::Error;
};

class ParseError : public DataError {
 public:
  using DataError::DataError;
};

class SchemaError : public DataError {
 public:
  using DataError::DataError;
};

class OrderingError : public DataError {
 public:
  using DataError::DataError;
};

}  // namespace phmadv
