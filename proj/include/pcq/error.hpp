#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

namespace pcq {

// Every failure raised by the library derives from Error. The CLI maps
// refusals (PropertyViolation and subclasses) to exit code 2 and everything
// else to exit code 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class InvalidAssignment : public Error {
 public:
  using Error::Error;
};

class ScopeError : public Error {
 public:
  using Error::Error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

class BudgetExceeded : public Error {
 public:
  using Error::Error;
};

class DivergenceUndefined : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string &what, int line, int column)
      : Error("line " + std::to_string(line) + ", column " + std::to_string(column) + ": " + what),
        line_(line),
        column_(column) {}
  int line() const { return line_; }
  int column() const { return column_; }

 private:
  int line_;
  int column_;
};

class UnknownOperation : public ParseError {
 public:
  using ParseError::ParseError;
};

class ArityError : public ParseError {
 public:
  using ParseError::ParseError;
};

// A structural precondition is missing. `citation` names the tractability row
// whose hardness result applies, e.g. "Log: #P-hard w/o Det".
class PropertyViolation : public Error {
 public:
  PropertyViolation(const std::string &what, std::string citation,
                    std::optional<uint32_t> unit = std::nullopt)
      : Error(what), citation_(std::move(citation)), unit_(unit) {}
  const std::string &citation() const { return citation_; }
  std::optional<uint32_t> unit() const { return unit_; }

 private:
  std::string citation_;
  std::optional<uint32_t> unit_;
};

// Product-unit scopes of two operands cannot be aligned.
class RearrangementFailure : public PropertyViolation {
 public:
  using PropertyViolation::PropertyViolation;
};

}  // namespace pcq
