#pragma once

#include <vector>

#include "pvs/damping.hpp"
#include "pvs/exec.hpp"
#include "pvs/expansions.hpp"
#include "pvs/fpvs.hpp"
#include "pvs/gaussian.hpp"
#include "pvs/models.hpp"

namespace pvs {

/// Reverse Gauss-Markov posterior: boundary marginal over x_T plus reverse
/// conditionals x_k -> x_{k-1} stored at indices 1..T (slot 0 unused).
struct ReversePosterior {
  Gaussian last;
  std::vector<AffineConditional> conditionals;  // size T+1, [0] unused

  int horizon() const { return static_cast<int>(conditionals.size()) - 1; }
};

/// Result of one forward recursion of the reverse smoother: potentials
/// k = 0..T, conditional log-normalizers at indices 1..T (slot 0 unused),
/// boundary log-normalizer at the terminal step.
struct ForwardPassOutput {
  ReversePosterior posterior;
  std::vector<Quadratic> potentials;
  std::vector<Quadratic> normalizers;
  double log_zT = 0.0;
};

ForwardPassOutput reverse_forward_pass(double beta, const ModelExpansion& expansion,
                                       const ReversePosterior& prev);

/// marginals[T] = last; marginals[k-1] from pushing marginals[k] through the
/// reverse conditionals.
std::vector<Gaussian> reverse_marginals(const ReversePosterior& post);

double joint_kl_reverse(const ReversePosterior& next, const ReversePosterior& prev);

double evaluate_dual_reverse(double beta, double log_zT, double epsilon);

DampedStep<ForwardPassOutput> optimal_damping_reverse(const DampingConfig& cfg,
                                                      const ModelExpansion& expansion,
                                                      const ReversePosterior& prev);

/// Exact reverse factorization of the joint represented by a forward
/// posterior (Gaussian conditioning step by step).
ReversePosterior to_reverse_factorization(const ForwardPosterior& fwd);

/// Reverse prior-predictive initialization: forward prior predictive converted
/// to its reverse factorization.
ReversePosterior reverse_prior_predictive(const StateSpaceModel& model, int horizon,
                                          const QuadratureSpec& spec = {});

struct RpvsResult {
  std::vector<Gaussian> marginals;
  ReversePosterior posterior;
  std::vector<IterationRecord> trace;
  std::vector<std::vector<Gaussian>> marginal_history;
  bool converged = false;
  int iterations = 0;
};

RpvsResult run_rpvs(const StateSpaceModel& model, const std::vector<Eigen::VectorXd>& observations,
                    ExpansionMethod method, const QuadratureSpec& spec, const DampingConfig& cfg,
                    ReversePosterior init, int max_iters, double conv_tol,
                    ExecPolicy exec = ExecPolicy::parallel);

}  // namespace pvs
