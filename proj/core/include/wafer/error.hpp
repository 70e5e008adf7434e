#pragma once

#include <stdexcept>
#include <string>

namespace wafer {

// Base of every error the library throws. The CLI maps the three families
// (config / data / numeric) onto distinct exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed or invalid input data (parse, validation, split, I/O).
class DataError : public Error {
 public:
  using Error::Error;
};

class ParseError : public DataError {
 public:
  ParseError(const std::string& what, std::size_t line)
      : DataError("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class ValidationError : public DataError {
 public:
  ValidationError(const std::string& field, const std::string& what, std::size_t line = 0)
      : DataError((line > 0 ? "line " + std::to_string(line) + ": " : std::string{}) + "field '" +
                  field + "': " + what),
        field_(field),
        line_(line) {}
  const std::string& field() const noexcept { return field_; }
  std::size_t line() const noexcept { return line_; }

 private:
  std::string field_;
  std::size_t line_;
};

class IoError : public DataError {
 public:
  using DataError::DataError;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

// A metric that is undefined for the given inputs (e.g. AUC with one class).
class UndefinedMetric : public Error {
 public:
  using Error::Error;
};

}  // namespace wafer
