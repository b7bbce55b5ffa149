#pragma once

#include <stdexcept>
#include <string>

namespace efiln {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Configuration and argument errors (CLI exit code 2).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// File system and file-format errors (CLI exit code 3).
class IoError : public Error {
 public:
  using Error::Error;
};

class SchemaError : public IoError {
 public:
  SchemaError(const std::string& what, std::size_t row)
      : IoError(what + " (row " + std::to_string(row) + ")"), row_(row) {}
  std::size_t row() const noexcept { return row_; }

 private:
  std::size_t row_;
};

// Numeric failures (CLI exit code 4).
class NumericError : public Error {
 public:
  using Error::Error;
};

class SourceCoincidence : public NumericError {
 public:
  using NumericError::NumericError;
};

class DegenerateComponent : public NumericError {
 public:
  using NumericError::NumericError;
};

class NonFiniteGradient : public NumericError {
 public:
  using NumericError::NumericError;
};

class NonFiniteLoss : public NumericError {
 public:
  using NumericError::NumericError;
};

class ShapeMismatch : public Error {
 public:
  using Error::Error;
};

class DomainTooSmall : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

}  // namespace efiln
