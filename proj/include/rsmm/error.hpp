#pragma once

#include <stdexcept>
#include <string>

namespace rsmm {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent input data (CSV, schema, dimensions).
class DataError : public Error {
 public:
  using Error::Error;
};

/// Invalid argument or configuration value.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Numerical failure that regularization could not repair.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Model file could not be read back.
class ModelFormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace rsmm
