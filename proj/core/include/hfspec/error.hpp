#pragma once

#include <stdexcept>
#include <string>

namespace hfspec {

// Base class for every error raised by the library. The subclasses map onto
// the CLI exit codes: InputError -> 1, ConvergenceError -> 2, RankError -> 3.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or inconsistent user input (config files, measurement tables,
// out-of-range indices, unit mismatches).
class InputError : public Error {
 public:
  using Error::Error;
};

class ConvergenceError : public Error {
 public:
  using Error::Error;
};

// A linear system or Jacobian that does not have the rank the problem needs.
class RankError : public Error {
 public:
  RankError(const std::string& what, double condition_number)
      : Error(what), condition_number_(condition_number) {}

  double condition_number() const noexcept { return condition_number_; }

 private:
  double condition_number_;
};

}  // namespace hfspec
