#pragma once

#include <stdexcept>
#include <string>

namespace kq {

// Config / input validation failures (CLI exit code 1).
class ValidationError : public std::runtime_error {
public:
  explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

// Called with arguments outside an operation's contract.
class PreconditionError : public std::invalid_argument {
public:
  explicit PreconditionError(const std::string& what) : std::invalid_argument(what) {}
};

// Quasi-static plasmon pole hit: a polarizability denominator vanished.
// Carries the offending denominator value for diagnosis.
class ResonanceError : public std::runtime_error {
public:
  ResonanceError(const std::string& what, double denom_abs)
      : std::runtime_error(what + " (|denominator| = " + std::to_string(denom_abs) + ")"),
        denominator_abs(denom_abs) {}
  double denominator_abs;
};

// Numerical failures (CLI exit code 2).
class NumericalError : public std::runtime_error {
public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

// Quadrature did not converge within the refinement budget.
class QuadratureError : public NumericalError {
public:
  QuadratureError(const std::string& what, double estimate_, double error_bound_)
      : NumericalError(what + " (estimate = " + std::to_string(estimate_) +
                       ", error bound = " + std::to_string(error_bound_) + ")"),
        estimate(estimate_), error_bound(error_bound_) {}
  double estimate;
  double error_bound;
};

}  // namespace kq
