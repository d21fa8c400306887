#pragma once

#include <stdexcept>
#include <string>

namespace pfcvm {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operands of incompatible shape.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// The model has lost every sample or every feature, or the data cannot
/// support a two-class fit.
class DegenerateModelError : public Error {
 public:
  using Error::Error;
};

/// Non-finite intermediate quantity.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Cholesky factorization failed even after the full jitter schedule.
class IllConditionedError : public Error {
 public:
  using Error::Error;
};

/// Malformed input file. Messages carry 1-based row/column coordinates.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// A metric whose formula is undefined on the given input.
class UndefinedMetricError : public Error {
 public:
  using Error::Error;
};

}  // namespace pfcvm
