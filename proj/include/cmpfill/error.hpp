#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace cmpfill {

/// Base for every error the library raises on bad input or bad configuration.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Geometry that violates a type invariant (degenerate, non-rectilinear, ...).
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Out-of-range or inconsistent parameters.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A caller broke a documented precondition (e.g. a halo too small for the
/// requested model reach).
class ContractViolation : public Error {
 public:
  using Error::Error;
};

/// Text-format parse failure with 1-based line and column.
class TextParseError : public Error {
 public:
  TextParseError(std::size_t line, std::size_t column, const std::string& what)
      : Error("line " + std::to_string(line) + ", column " +
              std::to_string(column) + ": " + what),
        line_(line),
        column_(column) {}

  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

}  // namespace cmpfill
