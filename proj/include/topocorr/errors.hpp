#pragma once

#include <stdexcept>
#include <string>

namespace topocorr {

/// A caller broke a documented precondition (bad order, odd index count, ...).
class ContractViolation : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A quantity was requested outside the domain where it is defined.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Base for failures of a numerical sub-operation (conditioning,
/// non-convergence). The CLI maps these to exit code 3.
class NumericalFailure : public std::runtime_error {
 public:
  NumericalFailure(std::string operation, const std::string& what)
      : std::runtime_error(operation + ": " + what), operation_(std::move(operation)) {}
  const std::string& operation() const noexcept { return operation_; }

 private:
  std::string operation_;
};

/// The two points are too close for the field-value block K to be inverted.
class DegenerateSeparation : public NumericalFailure {
 public:
  DegenerateSeparation(double r, double r_min)
      : NumericalFailure("assemble_sigma", "separation r = " + std::to_string(r) +
                                               " is not above r_min = " + std::to_string(r_min)),
        r_(r) {}
  double r() const noexcept { return r_; }

 private:
  double r_;
};

class ConditioningError : public NumericalFailure {
 public:
  ConditioningError(const std::string& operation, double rcond)
      : NumericalFailure(operation,
                         "matrix is numerically singular (reciprocal condition " +
                             std::to_string(rcond) + ")"),
        rcond_(rcond) {}
  double rcond() const noexcept { return rcond_; }

 private:
  double rcond_;
};

}  // namespace topocorr
