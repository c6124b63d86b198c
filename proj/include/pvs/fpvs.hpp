#pragma once

#include <utility>
#include <vector>

#include "pvs/damping.hpp"
#include "pvs/exec.hpp"
#include "pvs/expansions.hpp"
#include "pvs/gaussian.hpp"
#include "pvs/models.hpp"

namespace pvs {

/// Forward Gauss-Markov posterior: boundary marginal over x_0 plus T forward
/// conditionals x_k -> x_{k+1}.
struct ForwardPosterior {
  Gaussian first;
  std::vector<AffineConditional> conditionals;

  int horizon() const { return static_cast<int>(conditionals.size()); }
};

/// Result of one backward recursion: the updated posterior, the potential
/// coefficients (k = 0..T), the conditional log-normalizer coefficients
/// (k = 0..T-1), and the boundary log-normalizer.
struct BackwardPassOutput {
  ForwardPosterior posterior;
  std::vector<Quadratic> potentials;
  std::vector<Quadratic> normalizers;
  double log_z0 = 0.0;
};

/// One damped backward recursion at fixed beta, producing updated conditionals,
/// the boundary update, and all potential/normalizer coefficients including
/// their constant terms. Throws NotPositiveDefiniteError when a precision
/// block fails Cholesky; the damping loop reads that as "beta too small".
BackwardPassOutput forward_backward_pass(double beta, const ModelExpansion& expansion,
                                         const ForwardPosterior& prev);

std::vector<Gaussian> forward_marginals(const ForwardPosterior& post);

/// KL of the joint posteriors under the forward factorization: boundary KL
/// plus expected conditional KLs under the new marginals.
double joint_kl_forward(const ForwardPosterior& next, const ForwardPosterior& prev);

/// Dual objective value beta*eps/(1-beta) + log_z0/(1-beta); diagnostic only.
double evaluate_dual_forward(double beta, double log_z0, double epsilon);

DampedStep<BackwardPassOutput> optimal_damping_forward(const DampingConfig& cfg,
                                                       const ModelExpansion& expansion,
                                                       const ForwardPosterior& prev);

/// Prior-predictive initialization: boundary from the prior moments,
/// conditionals from regression of the dynamics at the propagated marginals.
ForwardPosterior prior_predictive_posterior(const StateSpaceModel& model, int horizon,
                                            const QuadratureSpec& spec = {});

struct FpvsResult {
  std::vector<Gaussian> marginals;
  ForwardPosterior posterior;
  std::vector<IterationRecord> trace;
  std::vector<std::vector<Gaussian>> marginal_history;
  bool converged = false;
  int iterations = 0;
};

FpvsResult run_fpvs(const StateSpaceModel& model, const std::vector<Eigen::VectorXd>& observations,
                    ExpansionMethod method, const QuadratureSpec& spec, const DampingConfig& cfg,
                    ForwardPosterior init, int max_iters, double conv_tol,
                    ExecPolicy exec = ExecPolicy::parallel);

/// Relative mean change max_k |m_new - m_old| / (1 + |m_old|).
double max_mean_change(const std::vector<Gaussian>& next, const std::vector<Gaussian>& prev);

}  // namespace pvs
