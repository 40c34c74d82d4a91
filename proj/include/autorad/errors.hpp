#pragma once

#include <stdexcept>
#include <string>

namespace autorad {

// Bad input: malformed files, violated preconditions, inconsistent ids.
// The CLI maps this to exit code 1; every other std::exception maps to 2.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Numerical failure during a computation whose inputs were valid
// (e.g. a non-finite gradient).
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace autorad
