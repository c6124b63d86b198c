#include "pvs/rpvs.hpp"

#include <chrono>
#include <cmath>

namespace pvs {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

}  // namespace

ForwardPassOutput reverse_forward_pass(double beta, const ModelExpansion& expansion,
                                       const ReversePosterior& prev) {
  if (!(beta >= 0.0 && beta < 1.0)) throw DomainError("pass: beta outside [0,1)");
  const int T = expansion.horizon();
  if (prev.horizon() != T) throw DomainError("pass: expansion horizon mismatch");
  const int d = prev.last.dim();
  const double w = 1.0 - beta;

  ForwardPassOutput out;
  out.potentials.resize(T + 1);
  out.normalizers.assign(T + 1, Quadratic::zero(d));
  out.posterior.conditionals.assign(T + 1, AffineConditional{});
  out.potentials[0] = expansion.prior;

  for (int k = 1; k <= T; ++k) {
    // ell_f for the pair (x_k, x_{k-1}) sits at dynamics index k-1
    const PairQuadratic& dq = expansion.dyn[k - 1];
    const Quadratic& vprev = out.potentials[k - 1];
    const AffineConditional& pc = prev.conditionals[k];
    const Eigen::MatrixXd site_cc = dq.block_cc + vprev.curvature;
    const Eigen::VectorXd site_c = dq.lin_c + vprev.linear;
    const Eigen::MatrixXd gcn_site = dq.block_nc.transpose();  // current row, next column

    WorkingBlocks wb;
    if (beta > 0.0) {
      auto llt_s = try_cholesky(pc.noise_cov);
      if (!llt_s) throw DomainError("pass: previous conditional covariance not PD");
      const Eigen::MatrixXd sigma_inv = inverse_spd(*llt_s);
      const Eigen::MatrixXd sigma_inv_f = llt_s->solve(pc.gain);
      const Eigen::VectorXd sigma_inv_d = llt_s->solve(pc.offset);
      wb.Gnn = symmetrized(w * dq.block_nn + beta * pc.gain.transpose() * sigma_inv_f);
      wb.Gcc = symmetrized(w * site_cc + beta * sigma_inv);
      wb.Gnc = (w * gcn_site + beta * sigma_inv_f).transpose();
      wb.gn = w * dq.lin_n - beta * pc.gain.transpose() * sigma_inv_d;
      wb.gc = w * site_c + beta * sigma_inv_d;
      wb.theta = w * (dq.constant + vprev.constant) -
                 0.5 * beta * (d * kLog2Pi + log_det(*llt_s)) -
                 0.5 * beta * pc.offset.dot(sigma_inv_d);
    } else {
      wb.Gnn = symmetrized(dq.block_nn);
      wb.Gcc = symmetrized(site_cc);
      wb.Gnc = dq.block_nc;
      wb.gn = dq.lin_n;
      wb.gc = site_c;
      wb.theta = dq.constant + vprev.constant;
    }
    const Eigen::MatrixXd gcn = wb.Gnc.transpose();

    auto llt_g = try_cholesky(wb.Gcc);
    if (!llt_g) throw NotPositiveDefiniteError(k, "Gcc");
    const Eigen::MatrixXd gain = llt_g->solve(gcn);  // Gcc^-1 Gcn
    const Eigen::VectorXd offset = llt_g->solve(wb.gc);

    // Schur complement with the 1/(1-beta) factor cancelled algebraically,
    // as in the forward pass.
    const Eigen::MatrixXd cross_resid = gcn_site - site_cc * pc.gain;
    const Eigen::MatrixXd schur_over_w = symmetrized(
        dq.block_nn - dq.block_nc * pc.gain - gain.transpose() * cross_resid);
    const Eigen::VectorXd lin_over_w =
        dq.lin_n + pc.gain.transpose() * site_c + cross_resid.transpose() * offset;

    Quadratic& norm = out.normalizers[k];
    norm.curvature = w * schur_over_w;
    norm.linear = w * lin_over_w;
    norm.constant = wb.theta + 0.5 * (d * kLog2Pi - log_det(*llt_g)) + 0.5 * wb.gc.dot(offset);

    const Quadratic& site = expansion.meas[k];
    out.potentials[k] = {symmetrized(site.curvature + schur_over_w),
                         site.linear + lin_over_w, site.constant + norm.constant / w};

    AffineConditional& cond = out.posterior.conditionals[k];
    cond.noise_cov = inverse_spd(*llt_g);
    cond.gain = gain;
    cond.offset = offset;
    cond.direction = Direction::reverse;
  }

  // boundary update over x_T and the log-normalizer as a quadratic in m_T
  BoundaryBlocks bb;
  const Quadratic& vT = out.potentials[T];
  Eigen::MatrixXd jxx;
  if (beta > 0.0) {
    auto llt_p = try_cholesky(prev.last.cov);
    if (!llt_p) throw DomainError("pass: previous boundary covariance not PD");
    const Eigen::MatrixXd p_inv = inverse_spd(*llt_p);
    bb.Jmm = symmetrized(w * vT.curvature + beta * p_inv);
    bb.Jxm = beta * p_inv;  // also Jmx; the two blocks coincide here
    bb.Jxx = beta * p_inv;
    bb.tau = w * vT.constant - 0.5 * beta * (d * kLog2Pi + log_det(*llt_p));
  } else {
    bb.Jmm = symmetrized(vT.curvature);
    bb.Jxm = Eigen::MatrixXd::Zero(d, d);
    bb.Jxx = Eigen::MatrixXd::Zero(d, d);
    bb.tau = vT.constant;
  }
  bb.jm = w * vT.linear;
  bb.jx = Eigen::VectorXd::Zero(d);

  auto llt_j = try_cholesky(bb.Jmm);
  if (!llt_j) throw NotPositiveDefiniteError(T, "Jmm");
  out.posterior.last.cov = inverse_spd(*llt_j);
  out.posterior.last.mean = llt_j->solve(bb.jm + bb.Jxm * prev.last.mean);

  const Eigen::MatrixXd jmm_inv_jmx = llt_j->solve(bb.Jxm);
  const Eigen::VectorXd jmm_inv_jm = llt_j->solve(bb.jm);
  const Eigen::MatrixXd big_u = symmetrized(bb.Jxx - bb.Jxm.transpose() * jmm_inv_jmx);
  const Eigen::VectorXd big_v = bb.jx - bb.Jxm.transpose() * jmm_inv_jm;
  const double eta =
      bb.tau + 0.5 * (d * kLog2Pi - log_det(*llt_j)) + 0.5 * bb.jm.dot(jmm_inv_jm);
  const Eigen::VectorXd& mT = prev.last.mean;
  out.log_zT = -0.5 * mT.dot(big_u * mT) + mT.dot(big_v) + eta;
  return out;
}

std::vector<Gaussian> reverse_marginals(const ReversePosterior& post) {
  const int T = post.horizon();
  std::vector<Gaussian> out(T + 1);
  out[T] = post.last;
  for (int k = T; k >= 1; --k) out[k - 1] = marginalize_affine(out[k], post.conditionals[k]);
  return out;
}

double joint_kl_reverse(const ReversePosterior& next, const ReversePosterior& prev) {
  if (next.horizon() != prev.horizon()) throw DomainError("joint_kl_reverse: horizon mismatch");
  const std::vector<Gaussian> margs = reverse_marginals(next);
  double kl = gaussian_kl(next.last, prev.last);
  for (int k = 1; k <= next.horizon(); ++k)
    kl += expected_conditional_kl(margs[k], next.conditionals[k], prev.conditionals[k]);
  return kl;
}

double evaluate_dual_reverse(double beta, double log_zT, double epsilon) {
  if (!(beta >= 0.0 && beta < 1.0)) throw DomainError("dual: beta outside [0,1)");
  return beta * epsilon / (1.0 - beta) + log_zT / (1.0 - beta);
}

DampedStep<ForwardPassOutput> optimal_damping_reverse(const DampingConfig& cfg,
                                                      const ModelExpansion& expansion,
                                                      const ReversePosterior& prev) {
  return detail::bisect_damping<ForwardPassOutput>(
      cfg, [&](double beta) { return reverse_forward_pass(beta, expansion, prev); },
      [&](const ForwardPassOutput& out) { return joint_kl_reverse(out.posterior, prev); });
}

ReversePosterior to_reverse_factorization(const ForwardPosterior& fwd) {
  const int T = fwd.horizon();
  const std::vector<Gaussian> margs = forward_marginals(fwd);
  ReversePosterior rev;
  rev.last = margs[T];
  rev.conditionals.assign(T + 1, AffineConditional{});
  for (int k = 1; k <= T; ++k) {
    auto llt = try_cholesky(margs[k].cov);
    if (!llt) throw DomainError("to_reverse_factorization: marginal covariance not PD");
    const Eigen::MatrixXd cross = fwd.conditionals[k - 1].gain * margs[k - 1].cov;
    AffineConditional& cond = rev.conditionals[k];
    cond.gain = llt->solve(cross).transpose();  // C[x_{k-1}, x_k] P_k^-1
    cond.offset = margs[k - 1].mean - cond.gain * margs[k].mean;
    cond.noise_cov =
        symmetrized(margs[k - 1].cov - cond.gain * margs[k].cov * cond.gain.transpose());
    cond.direction = Direction::reverse;
  }
  return rev;
}

ReversePosterior reverse_prior_predictive(const StateSpaceModel& model, int horizon,
                                          const QuadratureSpec& spec) {
  return to_reverse_factorization(prior_predictive_posterior(model, horizon, spec));
}

RpvsResult run_rpvs(const StateSpaceModel& model, const std::vector<Eigen::VectorXd>& observations,
                    ExpansionMethod method, const QuadratureSpec& spec, const DampingConfig& cfg,
                    ReversePosterior init, int max_iters, double conv_tol, ExecPolicy exec) {
  const int T = static_cast<int>(observations.size());
  if (init.horizon() != T) throw DomainError("run_rpvs: init horizon mismatch");

  RpvsResult result;
  result.posterior = std::move(init);
  result.marginals = reverse_marginals(result.posterior);

  for (int iter = 1; iter <= max_iters; ++iter) {
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<PairGaussian> joints;
    joints.reserve(T);
    for (int k = 0; k < T; ++k)
      joints.push_back(pairwise_joint(result.marginals[k + 1], result.posterior.conditionals[k + 1]));
    const ModelExpansion expansion =
        expand_model(model, observations, result.marginals, joints, method, spec, exec);

    DampedStep<ForwardPassOutput> step = optimal_damping_reverse(cfg, expansion, result.posterior);
    std::vector<Gaussian> new_marginals = reverse_marginals(step.pass.posterior);
    const double change = max_mean_change(new_marginals, result.marginals);
    const auto t1 = std::chrono::steady_clock::now();

    IterationRecord rec;
    rec.iter = iter;
    rec.beta = step.beta;
    rec.kl = step.kl;
    rec.epsilon = cfg.epsilon;
    rec.log_z_boundary = step.pass.log_zT;
    rec.dual_value = evaluate_dual_reverse(step.beta, step.pass.log_zT, cfg.epsilon);
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
