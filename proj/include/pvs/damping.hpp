#pragma once

#include <cmath>
#include <optional>
#include <utility>

#include "pvs/errors.hpp"

namespace pvs {

/// Trust-region parameters shared by all smoothers. epsilon is the KL radius;
/// the multiplier alpha maps to damping through beta = alpha / (1 + alpha).
struct DampingConfig {
  double epsilon = 0.0;
  double alpha_min = 1e-4;
  double alpha_max = 1e6;
  double alpha_init = 1.0;
  double kl_rel_tol = 1e-2;
  int max_bisect = 60;

  void validate() const {
    if (!(epsilon > 0.0)) throw DomainError("damping: epsilon must be positive");
    if (!(alpha_min > 0.0 && alpha_min < alpha_init && alpha_init < alpha_max))
      throw DomainError("damping: require 0 < alpha_min < alpha_init < alpha_max");
    if (!(kl_rel_tol > 0.0 && kl_rel_tol < 1.0))
      throw DomainError("damping: kl_rel_tol must lie in (0,1)");
    if (max_bisect < 1) throw DomainError("damping: max_bisect must be >= 1");
  }
};

/// Per-iteration diagnostics of an outer smoother loop.
struct IterationRecord {
  int iter = 0;
  double beta = 0.0;
  double kl = 0.0;
  double epsilon = 0.0;
  double log_z_boundary = 0.0;
  double dual_value = 0.0;
  double max_mean_change = 0.0;
  double wall_ms = 0.0;
};

template <class Output>
struct DampedStep {
  double beta = 0.0;
  double kl = 0.0;
  bool at_alpha_min = false;
  Output pass;
};

namespace detail {

/// Geometric bisection on the multiplier: shrink with sqrt(alpha*lo), grow with
/// sqrt(alpha*hi). A non-PD pass counts as a constraint violation (grow). When
/// the KL stays below epsilon all the way down to alpha_min the constraint is
/// inactive and the alpha_min step is accepted.
template <class Output, class RunPass, class JointKl>
DampedStep<Output> bisect_damping(const DampingConfig& cfg, RunPass&& run_pass,
                                  JointKl&& joint_kl) {
  cfg.validate();
  double lo = cfg.alpha_min;
  double hi = cfg.alpha_max;
  double alpha = cfg.alpha_init;
  std::optional<DampedStep<Output>> slack_best;

  for (int it = 0; it < cfg.max_bisect; ++it) {
    const double beta = alpha / (1.0 + alpha);
    bool feasible = true;
    std::optional<Output> out;
    double kl = 0.0;
    try {
      out = run_pass(beta);
      kl = joint_kl(*out);
    } catch (const NotPositiveDefiniteError&) {
      feasible = false;
    } catch (const NotIntegrableError&) {
      feasible = false;
    }

    if (feasible) {
      if (std::abs(cfg.epsilon - kl) <= cfg.kl_rel_tol * cfg.epsilon)
        return {beta, kl, false, std::move(*out)};
      if (kl < cfg.epsilon) {
        if (alpha <= cfg.alpha_min * (1.0 + 1e-12))
          return {beta, kl, true, std::move(*out)};
        if (!slack_best || kl > slack_best->kl)
          slack_best = DampedStep<Output>{beta, kl, false, std::move(*out)};
        hi = alpha;
        alpha = std::max(std::sqrt(alpha * lo), cfg.alpha_min);
        continue;
      }
    }
    lo = alpha;
    alpha = std::sqrt(alpha * hi);
  }

  if (slack_best) return std::move(*slack_best);
  throw NoFeasibleDampingError(
      "damping search exhausted its bisection budget without a feasible step");
}

}  // namespace detail

}  // namespace pvs
