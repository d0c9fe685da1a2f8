#pragma once

#include <stdexcept>
#include <string>

namespace tmqa {

struct SourceSpan {
  std::size_t line = 1;    // 1-based
  std::size_t column = 1;  // 1-based
};

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Input text could not be parsed. Always carries the offending position.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, SourceSpan span)
      : Error(what + " (line " + std::to_string(span.line) + ", column " +
              std::to_string(span.column) + ")"),
        span_(span) {}
  SourceSpan span() const { return span_; }

 private:
  SourceSpan span_;
};

/// A configured resource budget (atom cap, node cap, fuel) was exhausted.
class BudgetError : public Error {
 public:
  using Error::Error;
};

/// An operation was called outside its contract.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// An internal invariant the implementation relies on was violated.
class InvariantError : public Error {
 public:
  using Error::Error;
};

}  // namespace tmqa
