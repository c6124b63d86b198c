#pragma once

#include <Eigen/Core>
#include <utility>

#include "pvs/errors.hpp"
#include "pvs/linalg.hpp"

namespace pvs {

/// One Gaussian marginal N(mean, cov). cov must be symmetric positive
/// definite wherever an operation factorizes it.
struct Gaussian {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;

  int dim() const { return static_cast<int>(mean.size()); }
};

enum class Direction { forward, reverse };

/// Affine-Gaussian one-step conditional N(x_out | gain * x_in + offset, noise_cov).
/// forward maps x_k -> x_{k+1}; reverse maps x_k -> x_{k-1}.
struct AffineConditional {
  Eigen::MatrixXd gain;
  Eigen::VectorXd offset;
  Eigen::MatrixXd noise_cov;
  Direction direction = Direction::forward;
};

/// Quadratic log-density surrogate  -1/2 x'Ux + x'u + eta.
/// Curvature may be indefinite (potentials are); integrability is checked
/// where it matters.
struct Quadratic {
  Eigen::MatrixXd curvature;
  Eigen::VectorXd linear;
  double constant = 0.0;

  static Quadratic zero(int d) {
    return {Eigen::MatrixXd::Zero(d, d), Eigen::VectorXd::Zero(d), 0.0};
  }
  int dim() const { return static_cast<int>(linear.size()); }
  double operator()(const Eigen::VectorXd& x) const {
    return -0.5 * x.dot(curvature * x) + x.dot(linear) + constant;
  }
};

/// Block-structured quadratic over a state pair (next, current):
///   -1/2 [xn' xc'] [[Cnn, -Cnc], [-Cnc', Ccc]] [xn; xc] + xn'cn + xc'cc + kappa.
struct PairQuadratic {
  Eigen::MatrixXd block_nn;  // over the next state
  Eigen::MatrixXd block_cc;  // over the current state
  Eigen::MatrixXd block_nc;  // cross block, next row / current column
  Eigen::VectorXd lin_n;
  Eigen::VectorXd lin_c;
  double constant = 0.0;

  double operator()(const Eigen::VectorXd& next, const Eigen::VectorXd& cur) const {
    return -0.5 * next.dot(block_nn * next) - 0.5 * cur.dot(block_cc * cur) +
           next.dot(block_nc * cur) + next.dot(lin_n) + cur.dot(lin_c) + constant;
  }
};

/// Intermediate blocks of one smoother step (the G/g system before the Schur
/// complement); theta carries the constant term.
struct WorkingBlocks {
  Eigen::MatrixXd Gnn, Gcc, Gnc;
  Eigen::VectorXd gn, gc;
  double theta = 0.0;
};

/// Blocks of a boundary-marginal update; tau carries the constant term.
struct BoundaryBlocks {
  Eigen::MatrixXd Jxx, Jxm, Jmm;
  Eigen::VectorXd jx, jm;
  double tau = 0.0;
};

/// Exact Gaussian joint over a stacked state pair. `direction` records the
/// time ordering: forward means slot 0 holds the later state.
struct PairGaussian {
  Gaussian joint;
  Direction direction = Direction::forward;

  /// The joint permuted so slot 0 is the later state (identity for forward).
  Gaussian next_current() const;
};

double log_pdf(const Gaussian& marg, const Eigen::VectorXd& x);

/// Closed-form KL divergence D[q || p] between Gaussians.
double gaussian_kl(const Gaussian& q, const Gaussian& p);

/// log of integral exp(-1/2 x'Ux + x'u + eta) dx for positive definite U:
///   1/2 log|2 pi U^-1| + 1/2 u'U^-1 u + eta.
double log_integral_quadratic(const Quadratic& q);

/// Damped geometric-mixture update: the exact Gaussian proportional to
/// [N(x|prior)]^beta [exp potential(x)]^(1-beta), together with its
/// log-normalizer. beta in [0, 1).
std::pair<Gaussian, double> damped_gaussian_tilt(const Gaussian& prior,
                                                 const Quadratic& potential, double beta);

/// Consistency check of the tilt moments against central finite differences of
/// the log-normalizer with respect to the prior mean. Returns
/// (max mean deviation, max covariance deviation). beta in (0, 1).
std::pair<double, double> tilt_moment_check(const Gaussian& prior, const Quadratic& potential,
                                            double beta, double h = 1e-5);

/// Push a marginal through an affine conditional: (F m + d, F P F' + S).
Gaussian marginalize_affine(const Gaussian& marg, const AffineConditional& cond);

/// Exact joint over (child, parent) with cross covariance F P; child is the
/// conditional's output slot.
PairGaussian pairwise_joint(const Gaussian& marg, const AffineConditional& cond);

/// E_{x ~ marg}[ KL( new(.|x) || old(.|x) ) ] in closed form for two
/// affine-Gaussian conditionals of the same direction.
double expected_conditional_kl(const Gaussian& marg, const AffineConditional& next,
                               const AffineConditional& old);

}  // namespace pvs
