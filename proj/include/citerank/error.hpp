#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace citerank {

// Base of every error the library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input record; line() is 1-based, 0 when not line-addressed.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error(line == 0 ? what : "line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// Well-formed input that violates a domain invariant or operation precondition.
class ValidationError : public Error {
 public:
  using Error::Error;
};

}  // namespace citerank
