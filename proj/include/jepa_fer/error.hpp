#pragma once

#include <stdexcept>
#include <string>

namespace jepa_fer {

/// Base of every error raised by the library. The CLI maps the concrete
/// type onto its exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor extents do not fit the operation.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration value (hyperparameter, size, ratio...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Input violates the evaluation / training protocol (empty mask, fold
/// overlap, unknown label...).
class ProtocolError : public Error {
 public:
  using Error::Error;
};

/// Malformed file contents.
class FormatError : public Error {
 public:
  using Error::Error;
};

class IndexError : public Error {
 public:
  using Error::Error;
};

/// API misuse, e.g. backward on a detached tensor.
class UsageError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values during training.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace jepa_fer
