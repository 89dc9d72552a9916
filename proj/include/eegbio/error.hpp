#pragma once

#include <stdexcept>
#include <string>

namespace eegbio {

/// Broad failure category; maps onto the CLI exit codes.
enum class ErrorKind { config = 2, data = 3, numeric = 4 };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }
  int exit_code() const noexcept { return static_cast<int>(kind_); }

 private:
  ErrorKind kind_;
};

// Configuration and parameter errors (exit 2).
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(ErrorKind::config, what) {}
};
class ParameterError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

// Input data errors (exit 3).
class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(ErrorKind::data, what) {}
};
class SchemaError : public DataError {
 public:
  using DataError::DataError;
};
class ParseError : public DataError {
 public:
  using DataError::DataError;
};
class IntegrityError : public DataError {
 public:
  using DataError::DataError;
};
class TruncationError : public DataError {
 public:
  using DataError::DataError;
};
class ValidationError : public DataError {
 public:
  using DataError::DataError;
};
class RosterError : public DataError {
 public:
  using DataError::DataError;
};
class SupportError : public DataError {
 public:
  using DataError::DataError;
};
class SplitError : public DataError {
 public:
  using DataError::DataError;
};
class LabelError : public DataError {
 public:
  using DataError::DataError;
};
class EmptyInputError : public DataError {
 public:
  using DataError::DataError;
};

// Numeric / convergence errors (exit 4).
class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what) : Error(ErrorKind::numeric, what) {}
};
class UndefinedRatioError : public NumericError {
 public:
  using NumericError::NumericError;
};
class SeparationError : public NumericError {
 public:
  using NumericError::NumericError;
};
class ConvergenceError : public NumericError {
 public:
  using NumericError::NumericError;
};
class SelectionError : public NumericError {
 public:
  using NumericError::NumericError;
};

}  // namespace eegbio
