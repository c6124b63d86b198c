#include "pvs/hpvs.hpp"

#include <chrono>
#include <cmath>

namespace pvs {

std::vector<Gaussian> hybrid_marginals(double beta, const std::vector<Gaussian>& prev_marginals,
                                       const std::vector<Quadratic>& fwd_normalizers,
                                       const std::vector<Quadratic>& rev_potentials,
                                       const Gaussian& fwd_boundary,
                                       const Gaussian& rev_boundary) {
  if (!(beta >= 0.0 && beta < 1.0)) throw DomainError("hybrid_marginals: beta outside [0,1)");
  const int T = static_cast<int>(prev_marginals.size()) - 1;
  if (static_cast<int>(fwd_normalizers.size()) < T ||
      static_cast<int>(rev_potentials.size()) < T)
    throw DomainError("hybrid_marginals: coefficient lists shorter than horizon");
  const double w = 1.0 - beta;

  std::vector<Gaussian> out(T + 1);
  out[0] = fwd_boundary;
  out[T] = rev_boundary;
  for (int k = 1; k < T; ++k) {
    Eigen::MatrixXd prec =
        w * (rev_potentials[k].curvature + fwd_normalizers[k].curvature);
    Eigen::VectorXd lin = w * (rev_potentials[k].linear + fwd_normalizers[k].linear);
    if (beta > 0.0) {
      auto llt_p = try_cholesky(prev_marginals[k].cov);
      if (!llt_p) throw DomainError("hybrid_marginals: previous marginal covariance not PD");
      const Eigen::MatrixXd p_inv = inverse_spd(*llt_p);
      prec += beta * p_inv;
      lin += beta * (p_inv * prev_marginals[k].mean);
    }
    auto llt = try_cholesky(symmetrized(prec));
    if (!llt) throw NotPositiveDefiniteError(k, "hybrid precision");
    out[k].cov = inverse_spd(*llt);
    out[k].mean = llt->solve(lin);
  }
  return out;
}

HybridState hybrid_prior_predictive(const StateSpaceModel& model, int horizon,
                                    const QuadratureSpec& spec) {
  HybridState state;
  state.fwd = prior_predictive_posterior(model, horizon, spec);
  state.rev = to_reverse_factorization(state.fwd);
  state.marginals = forward_marginals(state.fwd);
  return state;
}

HpvsResult run_hpvs(const StateSpaceModel& model, const std::vector<Eigen::VectorXd>& observations,
                    ExpansionMethod method, const QuadratureSpec& spec, const DampingConfig& cfg,
                    HybridState init, int max_iters, double conv_tol, ExecPolicy exec) {
  const int T = static_cast<int>(observations.size());
  if (init.horizon() != T || static_cast<int>(init.marginals.size()) != T + 1)
    throw DomainError("run_hpvs: init horizon mismatch");

  HpvsResult result;
  result.state = std::move(init);
  result.marginals = result.state.marginals;

  for (int iter = 1; iter <= max_iters; ++iter) {
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<PairGaussian> joints;
    joints.reserve(T);
    for (int k = 0; k < T; ++k)
      joints.push_back(pairwise_joint(result.marginals[k], result.state.fwd.conditionals[k]));
    const ModelExpansion expansion =
        expand_model(model, observations, result.marginals, joints, method, spec, exec);

    // beta follows the forward strategy; the reverse pass reuses it
    DampedStep<BackwardPassOutput> step =
        optimal_damping_forward(cfg, expansion, result.state.fwd);
    ForwardPassOutput rev_out = reverse_forward_pass(step.beta, expansion, result.state.rev);

    std::vector<Gaussian> fused =
        hybrid_marginals(step.beta, result.marginals, step.pass.normalizers, rev_out.potentials,
                         step.pass.posterior.first, rev_out.posterior.last);
    const double change = max_mean_change(fused, result.marginals);

    const std::vector<Gaussian> fwd_margs = forward_marginals(step.pass.posterior);
    const std::vector<Gaussian> rev_margs = reverse_marginals(rev_out.posterior);
    double gap = 0.0;
    for (int k = 0; k <= T; ++k)
      gap = std::max(gap, (fwd_margs[k].mean - rev_margs[k].mean).norm());
    result.path_discrepancy.push_back(gap);
    const auto t1 = std::chrono::steady_clock::now();

    IterationRecord rec;
    rec.iter = iter;
    rec.beta = step.beta;
    rec.kl = step.kl;
    rec.epsilon = cfg.epsilon;
    rec.log_z_boundary = step.pass.log_z0;
    rec.dual_value = evaluate_dual_forward(step.beta, step.pass.log_z0, cfg.epsilon);
    rec.max_mean_change = change;
    rec.wall_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
    result.trace.push_back(rec);

    result.state.fwd = std::move(step.pass.posterior);
    result.state.rev = std::move(rev_out.posterior);
    result.state.marginals = std::move(fused);
    result.marginals = result.state.marginals;
    result.marginal_history.push_back(result.marginals);
    result.iterations = iter;
    if (change <= conv_tol) {
      result.converged = true;
      break;
    }
  }
  return result;
}

}  // namespace pvs
