#pragma once

#include <stdexcept>
#include <string>

namespace bnsl {

// Malformed input files, violated series invariants, or too few points for
// the requested model.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Numerical failure of the fitting pipeline (non-finite loss at the start
// point, no feasible grid candidate, ...).
class FitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Forward evaluation of the inverse-form law was asked for an x outside the
// range attained by the inverse map on its bracket.
class NoSolutionError : public std::domain_error {
 public:
  NoSolutionError(double x, double bracket_lo, double bracket_hi)
      : std::domain_error("no y solves g(y) = " + std::to_string(x) +
                          "; bracket attains [" + std::to_string(bracket_lo) +
                          ", " + std::to_string(bracket_hi) + "]"),
        x_(x),
        bracket_lo_(bracket_lo),
        bracket_hi_(bracket_hi) {}

  double x() const { return x_; }
  double bracket_lo() const { return bracket_lo_; }
  double bracket_hi() const { return bracket_hi_; }

 private:
  double x_;
  double bracket_lo_;
  double bracket_hi_;
};

}  // namespace bnsl
