#pragma once

#include <stdexcept>
#include <string>

namespace hillinv {

// Raised for bad user input (config keys, potential files). Maps to CLI exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Raised when a numerical kernel cannot deliver its contract. Maps to CLI exit code 3.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class EigenSolverError : public NumericalError {
 public:
  EigenSolverError(const std::string& what, double q, int s)
      : NumericalError(what + " (q=" + std::to_string(q) + ", s=" + std::to_string(s) + ")"),
        q_(q),
        s_(s) {}

  double q() const { return q_; }
  int s() const { return s_; }

 private:
  double q_;
  int s_;
};

class BracketError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

// The shifted operator A - c is (numerically) singular; pick a different theta.
class ShiftCollisionError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

}  // namespace hillinv
