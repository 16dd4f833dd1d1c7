#pragma once

#include <stdexcept>
#include <string>

namespace zap {

// Malformed input text (CSV/JSON cell that does not parse).
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Well-formed input that violates a domain invariant.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace zap
