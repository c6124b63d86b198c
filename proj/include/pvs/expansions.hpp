#pragma once

#include <functional>
#include <vector>

#include "pvs/exec.hpp"
#include "pvs/gaussian.hpp"
#include "pvs/models.hpp"
#include "pvs/quadrature.hpp"

namespace pvs {

/// Best affine-Gaussian fit y ~ N(gain * x + offset, noise_cov) under a
/// reference marginal.
struct AffineRegression {
  Eigen::MatrixXd gain;
  Eigen::VectorXd offset;
  Eigen::MatrixXd noise_cov;
};

/// Quadratic surrogates of the model log-densities at one iterate:
/// dyn[k] covers the pair (x_{k+1}, x_k) for k = 0..T-1, meas[k] covers y_k
/// for k = 1..T (slot 0 unused), prior covers x_0.
struct ModelExpansion {
  Quadratic prior;
  std::vector<Quadratic> meas;
  std::vector<PairQuadratic> dyn;

  int horizon() const { return static_cast<int>(dyn.size()); }
};

enum class ExpansionMethod { gslr, fourier_hermite };

using CondMeanFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;
using CondCovFn = std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>;
using ScalarFn = std::function<double(const Eigen::VectorXd&)>;

/// Statistical linear regression of a conditional density against `marg`,
/// with marginal moments obtained by the law of total expectation evaluated
/// through `rule`. The residual covariance is symmetrized and clipped to PSD.
AffineRegression gslr(const CondMeanFn& cond_mean, const CondCovFn& cond_cov,
                      const Gaussian& marg, const QuadratureRule& rule);

/// Exact quadratic coefficients of log N(x_next | A x + b, Omega).
PairQuadratic regression_to_dyn_quadratic(const AffineRegression& reg);

/// Exact quadratic coefficients in x of log N(y | H x + e, Delta).
Quadratic regression_to_meas_quadratic(const AffineRegression& reg, const Eigen::VectorXd& y);

/// Second-order Fourier-Hermite expansion of g under `marg`, evaluated from
/// plain g values at the rule's nodes through the Hermite-polynomial moment
/// identities. No curvature projection: an indefinite result is the caller's
/// signal to damp harder.
Quadratic fourier_hermite(const ScalarFn& g, const Gaussian& marg, const QuadratureRule& rule);

/// Build the full surrogate model at the iterate's marginals (T+1 of them) and
/// pairwise joints (T, ordered so next_current() yields (x_{k+1}, x_k)).
/// Per-step expansions are independent; the parallel policy maps them across
/// threads with bit-identical results.
ModelExpansion expand_model(const StateSpaceModel& model,
                            const std::vector<Eigen::VectorXd>& observations,
                            const std::vector<Gaussian>& marginals,
                            const std::vector<PairGaussian>& joints, ExpansionMethod method,
                            const QuadratureSpec& spec,
                            ExecPolicy exec = ExecPolicy::parallel);

/// Exact expansion of a linear-Gaussian model (independent of the iterate).
ModelExpansion exact_linear_expansion(const LinearGaussianModel& model,
                                      const std::vector<Eigen::VectorXd>& observations);

}  // namespace pvs
