#include "pvs/fpvs.hpp"

#include <chrono>
#include <cmath>

namespace pvs {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

}  // namespace

BackwardPassOutput forward_backward_pass(double beta, const ModelExpansion& expansion,
                                         const ForwardPosterior& prev) {
  if (!(beta >= 0.0 && beta < 1.0)) throw DomainError("pass: beta outside [0,1)");
  const int T = expansion.horizon();
  if (prev.horizon() != T) throw DomainError("pass: expansion horizon mismatch");
  const int d = prev.first.dim();
  const double w = 1.0 - beta;

  BackwardPassOutput out;
  out.potentials.resize(T + 1);
  out.normalizers.resize(T);
  out.posterior.conditionals.resize(T);
  out.potentials[T] = expansion.meas[T];

  for (int k = T - 1; k >= 0; --k) {
    const PairQuadratic& dq = expansion.dyn[k];
    const Quadratic& vnext = out.potentials[k + 1];
    const AffineConditional& pc = prev.conditionals[k];
    const Eigen::MatrixXd site_nn = dq.block_nn + vnext.curvature;
    const Eigen::VectorXd site_n = dq.lin_n + vnext.linear;

    WorkingBlocks wb;
    if (beta > 0.0) {
      auto llt_s = try_cholesky(pc.noise_cov);
      if (!llt_s) throw DomainError("pass: previous conditional covariance not PD");
      const Eigen::MatrixXd sigma_inv = inverse_spd(*llt_s);
      const Eigen::MatrixXd sigma_inv_f = llt_s->solve(pc.gain);
      const Eigen::VectorXd sigma_inv_d = llt_s->solve(pc.offset);
      wb.Gnn = symmetrized(w * site_nn + beta * sigma_inv);
      wb.Gcc = symmetrized(w * dq.block_cc + beta * pc.gain.transpose() * sigma_inv_f);
      wb.Gnc = w * dq.block_nc + beta * sigma_inv_f;
      wb.gn = w * site_n + beta * sigma_inv_d;
      wb.gc = w * dq.lin_c - beta * pc.gain.transpose() * sigma_inv_d;
      wb.theta = w * (dq.constant + vnext.constant) -
                 0.5 * beta * (d * kLog2Pi + log_det(*llt_s)) -
                 0.5 * beta * pc.offset.dot(sigma_inv_d);
    } else {
      wb.Gnn = symmetrized(site_nn);
      wb.Gcc = dq.block_cc;
      wb.Gnc = dq.block_nc;
      wb.gn = site_n;
      wb.gc = dq.lin_c;
      wb.theta = dq.constant + vnext.constant;
    }

    auto llt_g = try_cholesky(wb.Gnn);
    if (!llt_g) throw NotPositiveDefiniteError(k, "Gnn");
    const Eigen::MatrixXd gain = llt_g->solve(wb.Gnc);  // Gnn^-1 Gnc
    const Eigen::VectorXd offset = llt_g->solve(wb.gn);

    // Schur complement with the 1/(1-beta) factor cancelled algebraically:
    // Gcc - Gnc' F_prev = (1-beta)(Ccc - Cnc' F_prev) holds identically, so
    // the potentials never see the beta -> 1 blowup.
    const Eigen::MatrixXd cross_resid = dq.block_nc - site_nn * pc.gain;
    const Eigen::MatrixXd schur_over_w = symmetrized(
        dq.block_cc - dq.block_nc.transpose() * pc.gain - gain.transpose() * cross_resid);
    const Eigen::VectorXd lin_over_w =
        dq.lin_c + pc.gain.transpose() * site_n + cross_resid.transpose() * offset;

    Quadratic& norm = out.normalizers[k];
    norm.curvature = w * schur_over_w;
    norm.linear = w * lin_over_w;
    norm.constant = wb.theta + 0.5 * (d * kLog2Pi - log_det(*llt_g)) + 0.5 * wb.gn.dot(offset);

    const Quadratic& site = (k == 0) ? expansion.prior : expansion.meas[k];
    out.potentials[k] = {symmetrized(site.curvature + schur_over_w),
                         site.linear + lin_over_w, site.constant + norm.constant / w};

    AffineConditional& cond = out.posterior.conditionals[k];
    cond.noise_cov = inverse_spd(*llt_g);
    cond.gain = gain;
    cond.offset = offset;
    cond.direction = Direction::forward;
  }

  // boundary update over x_0 and the log-normalizer as a quadratic in m_0
  BoundaryBlocks bb;
  const Quadratic& v0 = out.potentials[0];
  if (beta > 0.0) {
    auto llt_p = try_cholesky(prev.first.cov);
    if (!llt_p) throw DomainError("pass: previous boundary covariance not PD");
    const Eigen::MatrixXd p_inv = inverse_spd(*llt_p);
    bb.Jxx = symmetrized(w * v0.curvature + beta * p_inv);
    bb.Jxm = beta * p_inv;
    bb.Jmm = beta * p_inv;
    bb.tau = w * v0.constant - 0.5 * beta * (d * kLog2Pi + log_det(*llt_p));
  } else {
    bb.Jxx = symmetrized(v0.curvature);
    bb.Jxm = Eigen::MatrixXd::Zero(d, d);
    bb.Jmm = Eigen::MatrixXd::Zero(d, d);
    bb.tau = v0.constant;
  }
  bb.jx = w * v0.linear;
  bb.jm = Eigen::VectorXd::Zero(d);

  auto llt_j = try_cholesky(bb.Jxx);
  if (!llt_j) throw NotPositiveDefiniteError(0, "Jxx");
  out.posterior.first.cov = inverse_spd(*llt_j);
  out.posterior.first.mean = llt_j->solve(bb.jx + bb.Jxm * prev.first.mean);

  const Eigen::MatrixXd jxx_inv_jxm = llt_j->solve(bb.Jxm);
  const Eigen::VectorXd jxx_inv_jx = llt_j->solve(bb.jx);
  const Eigen::MatrixXd big_u = symmetrized(bb.Jmm - bb.Jxm.transpose() * jxx_inv_jxm);
  const Eigen::VectorXd big_v = bb.jm - bb.Jxm.transpose() * jxx_inv_jx;
  const double eta =
      bb.tau + 0.5 * (d * kLog2Pi - log_det(*llt_j)) + 0.5 * bb.jx.dot(jxx_inv_jx);
  const Eigen::VectorXd& m0 = prev.first.mean;
  out.log_z0 = -0.5 * m0.dot(big_u * m0) + m0.dot(big_v) + eta;
  return out;
}

std::vector<Gaussian> forward_marginals(const ForwardPosterior& post) {
  std::vector<Gaussian> out;
  out.reserve(post.horizon() + 1);
  out.push_back(post.first);
  for (const auto& cond : post.conditionals) out.push_back(marginalize_affine(out.back(), cond));
  return out;
}

double joint_kl_forward(const ForwardPosterior& next, const ForwardPosterior& prev) {
  if (next.horizon() != prev.horizon()) throw DomainError("joint_kl_forward: horizon mismatch");
  const std::vector<Gaussian> margs = forward_marginals(next);
  double kl = gaussian_kl(next.first, prev.first);
  for (int k = 0; k < next.horizon(); ++k)
    kl += expected_conditional_kl(margs[k], next.conditionals[k], prev.conditionals[k]);
  return kl;
}

double evaluate_dual_forward(double beta, double log_z0, double epsilon) {
  if (!(beta >= 0.0 && beta < 1.0)) throw DomainError("dual: beta outside [0,1)");
  return beta * epsilon / (1.0 - beta) + log_z0 / (1.0 - beta);
}

DampedStep<BackwardPassOutput> optimal_damping_forward(const DampingConfig& cfg,
                                                       const ModelExpansion& expansion,
                                                       const ForwardPosterior& prev) {
  return detail::bisect_damping<BackwardPassOutput>(
      cfg, [&](double beta) { return forward_backward_pass(beta, expansion, prev); },
      [&](const BackwardPassOutput& out) { return joint_kl_forward(out.posterior, prev); });
}

ForwardPosterior prior_predictive_posterior(const StateSpaceModel& model, int horizon,
                                            const QuadratureSpec& spec) {
  const QuadratureRule rule = make_rule(spec, model.dim_x());
  ForwardPosterior post;
  post.first = model.prior_moments();
  post.conditionals.reserve(horizon);
  Gaussian marg = post.first;
  for (int k = 0; k < horizon; ++k) {
    const AffineRegression reg =
        gslr([&](const Eigen::VectorXd& x) { return model.dyn_cond_mean(k, x); },
             [&](const Eigen::VectorXd& x) { return model.dyn_cond_cov(k, x); }, marg, rule);
    auto llt = try_cholesky(reg.noise_cov, 1e-10);
    if (!llt) throw DomainError("prior predictive: degenerate dynamics residual covariance");
    const Eigen::MatrixXd floored = llt->matrixL() * llt->matrixL().toDenseMatrix().transpose();
    post.conditionals.push_back(
        {reg.gain, reg.offset, symmetrized(floored), Direction::forward});
    marg = marginalize_affine(marg, post.conditionals.back());
  }
  return post;
}

double max_mean_change(const std::vector<Gaussian>& next, const std::vector<Gaussian>& prev) {
  double worst = 0.0;
  for (std::size_t k = 0; k < next.size(); ++k) {
    const double change =
        (next[k].mean - prev[k].mean).norm() / (1.0 + prev[k].mean.norm());
    worst = std::max(worst, change);
  }
  return worst;
}

FpvsResult run_fpvs(const StateSpaceModel& model, const std::vector<Eigen::VectorXd>& observations,
                    ExpansionMethod method, const QuadratureSpec& spec, const DampingConfig& cfg,
                    ForwardPosterior init, int max_iters, double conv_tol, ExecPolicy exec) {
  const int T = static_cast<int>(observations.size());
  if (init.horizon() != T) throw DomainError("run_fpvs: init horizon mismatch");

  FpvsResult result;
  result.posterior = std::move(init);
  result.marginals = forward_marginals(result.posterior);

  for (int iter = 1; iter <= max_iters; ++iter) {
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<PairGaussian> joints;
    joints.reserve(T);
    for (int k = 0; k < T; ++k)
      joints.push_back(pairwise_joint(result.marginals[k], result.posterior.conditionals[k]));
    const ModelExpansion expansion =
        expand_model(model, observations, result.marginals, joints, method, spec, exec);

    DampedStep<BackwardPassOutput> step = optimal_damping_forward(cfg, expansion, result.posterior);
    std::vector<Gaussian> new_marginals = forward_marginals(step.pass.posterior);
    const double change = max_mean_change(new_marginals, result.marginals);
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

    result.posterior = std::move(step.pass.posterior);
    result.marginals = std::move(new_marginals);
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
