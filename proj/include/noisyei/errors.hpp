#pragma once

#include <stdexcept>
#include <string>

namespace nei {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Argument outside the mathematical domain of a function (e.g. a
/// probability of exactly 0 passed to a quantile).
class DomainError : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

class InsufficientData : public Error {
 public:
  using Error::Error;
};

/// A covariance or Gram matrix could not be factorized even after the
/// jitter ladder was exhausted.
class ConditioningError : public Error {
 public:
  using Error::Error;
};

class UnsupportedDimension : public Error {
 public:
  using Error::Error;
};

class OptimizationFailure : public Error {
 public:
  using Error::Error;
};

class IncompatibleVersion : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace nei
