#pragma once

#include <stdexcept>
#include <string>

namespace pvs {

/// A covariance or model input violated its contract (non-PD matrix,
/// incompatible dimensions, invalid parameter range).
struct DomainError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// The exponent of a Gaussian-type integral is indefinite, so the integral
/// diverges. Damping loops interpret this as "beta too small".
struct NotIntegrableError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A precision block inside a smoother pass failed its Cholesky factorization.
/// Carries the time step and block name for diagnostics.
struct NotPositiveDefiniteError : std::runtime_error {
  NotPositiveDefiniteError(int step_, std::string block_)
      : std::runtime_error("block " + block_ + " not positive definite at step " +
                           std::to_string(step_)),
        step(step_),
        block(std::move(block_)) {}
  int step;
  std::string block;
};

/// The damping search exhausted its multiplier range without producing a
/// positive-definite pass.
struct NoFeasibleDampingError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A quadrature rule would exceed the node budget.
struct CapacityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// An integrand evaluated to a non-finite value at a quadrature node.
struct EvaluationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// The grid smoother detected probability mass at the edge of its grid.
struct GridTooSmallError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Configuration or comparison input failed validation; `field` names
/// the offending key.
struct ValidationError : std::runtime_error {
  explicit ValidationError(std::string field_)
      : std::runtime_error("invalid or unknown field: " + field_), field(std::move(field_)) {}
  std::string field;
};

/// A config file could not be parsed at all.
struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace pvs
