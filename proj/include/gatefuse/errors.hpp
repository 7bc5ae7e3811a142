#pragma once

#include <stdexcept>
#include <string>

namespace gatefuse {

// Error taxonomy shared by every module. All derive from std::runtime_error
// so callers that do not care about the category can catch one type.

struct DimensionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Non-finite values or arguments outside a function's numeric domain.
struct NumericDomainError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad scalar hyper-parameter (temperature <= 0, alpha outside [0,1], ...).
struct ParameterError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Caller broke a documented precondition between two objects
// (misaligned example ids, missing tape, ...).
struct ContractViolation : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IndexError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ParseError : std::runtime_error {
  ParseError(const std::string& what, std::size_t line)
      : std::runtime_error(what + " (line " + std::to_string(line) + ")"), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace gatefuse
