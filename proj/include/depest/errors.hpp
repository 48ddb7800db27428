#pragma once

#include <stdexcept>
#include <string>

namespace depest {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid hyperparameters or configuration values.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Incompatible tensor shapes.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// An operation would produce (or was given) no data.
class EmptyInputError : public Error {
 public:
  using Error::Error;
};

/// Malformed file contents.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Missing files and other I/O failures.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values or other numeric breakdowns.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Misuse of the autodiff graph (e.g. backward twice).
class GraphError : public Error {
 public:
  using Error::Error;
};

}  // namespace depest
