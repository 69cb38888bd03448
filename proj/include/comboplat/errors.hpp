#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace comboplat {

// How a failure is surfaced to callers of the command-line front end.
enum class ErrorCategory {
  Validation,  // bad inputs, schema or parse problems
  Numeric,     // solver or factorization failed
  Budget,      // search exceeded its configured cap
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& what)
      : std::runtime_error(what), category_(category) {}

  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

class DomainError : public Error {
 public:
  explicit DomainError(const std::string& what) : Error(ErrorCategory::Validation, what) {}
};

class NotPositiveDefinite : public Error {
 public:
  explicit NotPositiveDefinite(const std::string& what) : Error(ErrorCategory::Numeric, what) {}
};

class PrecisionUnreachable : public Error {
 public:
  explicit PrecisionUnreachable(const std::string& what) : Error(ErrorCategory::Numeric, what) {}
};

class RootBracketError : public Error {
 public:
  explicit RootBracketError(const std::string& what) : Error(ErrorCategory::Numeric, what) {}
};

class ConvergenceError : public Error {
 public:
  explicit ConvergenceError(const std::string& what) : Error(ErrorCategory::Numeric, what) {}
};

class BudgetExceeded : public Error {
 public:
  explicit BudgetExceeded(const std::string& what) : Error(ErrorCategory::Budget, what) {}
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error(ErrorCategory::Validation, what), line_(line) {}

  // 1-based line in the source file; 0 when the error is not tied to one line.
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class SchemaError : public Error {
 public:
  SchemaError(const std::string& what, std::string column)
      : Error(ErrorCategory::Validation, what), column_(std::move(column)) {}

  const std::string& column() const noexcept { return column_; }

 private:
  std::string column_;
};

class InsufficientData : public Error {
 public:
  explicit InsufficientData(const std::string& what) : Error(ErrorCategory::Validation, what) {}
};

class ZeroVariance : public Error {
 public:
  explicit ZeroVariance(const std::string& what) : Error(ErrorCategory::Validation, what) {}
};

}  // namespace comboplat
