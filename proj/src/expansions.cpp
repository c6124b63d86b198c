#include "pvs/expansions.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <exception>

#include "pvs/errors.hpp"

namespace pvs {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;
constexpr double kNoiseFloorRel = 1e-10;

Eigen::LLT<Eigen::MatrixXd> noise_cholesky(const Eigen::MatrixXd& cov, const char* what) {
  auto llt = try_cholesky(cov, kNoiseFloorRel);
  if (!llt) throw DomainError(std::string(what) + " is not invertible after jitter floor");
  return *llt;
}

PairQuadratic split_stacked(const Quadratic& stacked, int d) {
  PairQuadratic out;
  out.block_nn = stacked.curvature.topLeftCorner(d, d);
  out.block_cc = stacked.curvature.bottomRightCorner(d, d);
  out.block_nc = -stacked.curvature.topRightCorner(d, d);
  out.lin_n = stacked.linear.head(d);
  out.lin_c = stacked.linear.tail(d);
  out.constant = stacked.constant;
  return out;
}

Quadratic prior_moment_match(const Gaussian& prior) {
  auto llt = noise_cholesky(prior.cov, "prior covariance");
  const Eigen::MatrixXd prec = inverse_spd(llt);
  Quadratic q;
  q.curvature = prec;
  q.linear = prec * prior.mean;
  q.constant = -0.5 * (prior.dim() * kLog2Pi + log_det(llt) + prior.mean.dot(q.linear));
  return q;
}

}  // namespace

AffineRegression gslr(const CondMeanFn& cond_mean, const CondCovFn& cond_cov,
                      const Gaussian& marg, const QuadratureRule& rule) {
  auto llt_x = try_cholesky(marg.cov);
  if (!llt_x) throw DomainError("gslr: singular marginal covariance");
  const Eigen::MatrixXd L = llt_x->matrixL();
  const int d = marg.dim();

  const Eigen::VectorXd x0 = marg.mean + L * rule.nodes.row(0).transpose();
  const int m = static_cast<int>(cond_mean(x0).size());

  Eigen::VectorXd mean_y = Eigen::VectorXd::Zero(m);
  Eigen::VectorXd mean_x = Eigen::VectorXd::Zero(d);
  Eigen::MatrixXd raw_yx = Eigen::MatrixXd::Zero(m, d);
  Eigen::MatrixXd raw_yy = Eigen::MatrixXd::Zero(m, m);
  Eigen::MatrixXd mean_cc = Eigen::MatrixXd::Zero(m, m);
  for (int i = 0; i < rule.count(); ++i) {
    const Eigen::VectorXd x = marg.mean + L * rule.nodes.row(i).transpose();
    const Eigen::VectorXd cm = cond_mean(x);
    const double w = rule.weights(i);
    mean_y += w * cm;
    mean_x += w * x;
    raw_yx += w * cm * x.transpose();
    raw_yy += w * cm * cm.transpose();
    mean_cc += w * cond_cov(x);
  }

  const Eigen::MatrixXd cov_yx = raw_yx - mean_y * mean_x.transpose();
  const Eigen::MatrixXd var_y = symmetrized(raw_yy - mean_y * mean_y.transpose()) + mean_cc;

  AffineRegression reg;
  reg.gain = llt_x->solve(cov_yx.transpose()).transpose();  // C[y,x] V[x]^-1
  reg.offset = mean_y - reg.gain * marg.mean;
  Eigen::MatrixXd residual =
      symmetrized(var_y - reg.gain * marg.cov * reg.gain.transpose());
  // quadrature error can push the residual slightly indefinite
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(residual);
  const Eigen::VectorXd clipped = eig.eigenvalues().cwiseMax(0.0);
  reg.noise_cov = symmetrized(eig.eigenvectors() * clipped.asDiagonal() *
                              eig.eigenvectors().transpose());
  return reg;
}

PairQuadratic regression_to_dyn_quadratic(const AffineRegression& reg) {
  auto llt = noise_cholesky(reg.noise_cov, "dynamics residual covariance");
  const int m = static_cast<int>(reg.offset.size());
  PairQuadratic q;
  q.block_nn = inverse_spd(llt);
  q.block_nc = llt.solve(reg.gain);
  q.block_cc = symmetrized(reg.gain.transpose() * q.block_nc);
  q.lin_n = llt.solve(reg.offset);
  q.lin_c = -reg.gain.transpose() * q.lin_n;
  q.constant = -0.5 * (m * kLog2Pi + log_det(llt)) - 0.5 * reg.offset.dot(q.lin_n);
  return q;
}

Quadratic regression_to_meas_quadratic(const AffineRegression& reg, const Eigen::VectorXd& y) {
  auto llt = noise_cholesky(reg.noise_cov, "measurement residual covariance");
  const int m = static_cast<int>(reg.offset.size());
  const Eigen::VectorXd resid = y - reg.offset;
  const Eigen::VectorXd solved = llt.solve(resid);
  Quadratic q;
  q.curvature = symmetrized(reg.gain.transpose() * llt.solve(reg.gain));
  q.linear = reg.gain.transpose() * solved;
  q.constant = -0.5 * (m * kLog2Pi + log_det(llt)) - 0.5 * resid.dot(solved);
  return q;
}

Quadratic fourier_hermite(const ScalarFn& g, const Gaussian& marg, const QuadratureRule& rule) {
  auto llt = try_cholesky(marg.cov);
  if (!llt) throw DomainError("fourier_hermite: covariance is not positive definite");
  const Eigen::MatrixXd L = llt->matrixL();
  const int d = marg.dim();
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(d, d);

  double mean_g = 0.0;
  Eigen::VectorXd gh1 = Eigen::VectorXd::Zero(d);
  Eigen::MatrixXd gh2 = Eigen::MatrixXd::Zero(d, d);
  for (int i = 0; i < rule.count(); ++i) {
    const Eigen::VectorXd s = rule.nodes.row(i).transpose();
    const double value = g(Eigen::VectorXd(marg.mean + L * s));
    if (!std::isfinite(value)) throw EvaluationError("non-finite integrand at quadrature node");
    const double w = rule.weights(i);
    mean_g += w * value;
    gh1 += (w * value) * s;
    gh2 += (w * value) * (s * s.transpose() - eye);
  }
  gh2 = symmetrized(gh2);

  // E[g H1] = R' E[Gz], E[g H2] = R' E[Gzz] R with P = R R'.
  const auto upper = L.transpose().triangularView<Eigen::Upper>();
  const Eigen::VectorXd grad = upper.solve(gh1);
  const Eigen::MatrixXd half = upper.solve(gh2);
  const Eigen::MatrixXd hess = symmetrized(upper.solve(half.transpose()).transpose());

  Quadratic q;
  q.curvature = -hess;
  q.linear = grad - hess * marg.mean;
  q.constant = mean_g - grad.dot(marg.mean) + 0.5 * marg.mean.dot(hess * marg.mean) -
               0.5 * gh2.trace();
  return q;
}

ModelExpansion expand_model(const StateSpaceModel& model,
                            const std::vector<Eigen::VectorXd>& observations,
                            const std::vector<Gaussian>& marginals,
                            const std::vector<PairGaussian>& joints, ExpansionMethod method,
                            const QuadratureSpec& spec, ExecPolicy exec) {
  const int T = static_cast<int>(observations.size());
  const int d = model.dim_x();
  if (static_cast<int>(marginals.size()) != T + 1)
    throw DomainError("expand_model: need T+1 marginals");
  if (static_cast<int>(joints.size()) != T) throw DomainError("expand_model: need T joints");

  const QuadratureRule rule_x = make_rule(spec, d);
  const QuadratureRule rule_xx =
      method == ExpansionMethod::fourier_hermite ? make_rule(spec, 2 * d) : QuadratureRule{};

  ModelExpansion out;
  out.dyn.resize(T);
  out.meas.assign(T + 1, Quadratic::zero(d));

  const int tasks = 2 * T + 1;
  std::exception_ptr failure;
  const bool go_parallel = exec == ExecPolicy::parallel;

  auto run_task = [&](int task) {
    if (task < T) {
      const int k = task;
      if (method == ExpansionMethod::gslr) {
        const AffineRegression reg =
            gslr([&](const Eigen::VectorXd& x) { return model.dyn_cond_mean(k, x); },
                 [&](const Eigen::VectorXd& x) { return model.dyn_cond_cov(k, x); },
                 marginals[k], rule_x);
        out.dyn[k] = regression_to_dyn_quadratic(reg);
      } else {
        const Gaussian pair = joints[k].next_current();
        const Quadratic stacked = fourier_hermite(
            [&](const Eigen::VectorXd& w) {
              return model.dyn_logpdf(k, w.head(d), w.tail(d));
            },
            pair, rule_xx);
        out.dyn[k] = split_stacked(stacked, d);
      }
    } else if (task < 2 * T) {
      const int k = task - T + 1;
      const Eigen::VectorXd& y = observations[k - 1];
      if (method == ExpansionMethod::gslr) {
        const AffineRegression reg =
            gslr([&](const Eigen::VectorXd& x) { return model.meas_cond_mean(k, x); },
                 [&](const Eigen::VectorXd& x) { return model.meas_cond_cov(k, x); },
                 marginals[k], rule_x);
        out.meas[k] = regression_to_meas_quadratic(reg, y);
      } else {
        out.meas[k] = fourier_hermite(
            [&](const Eigen::VectorXd& x) { return model.meas_logpdf(k, y, x); },
            marginals[k], rule_x);
      }
    } else {
      if (method == ExpansionMethod::gslr) {
        out.prior = prior_moment_match(model.prior_moments());
      } else {
        out.prior = fourier_hermite(
            [&](const Eigen::VectorXd& x) { return model.prior_logpdf(x); }, marginals[0],
            rule_x);
      }
    }
  };

#ifdef PVS_HAVE_OPENMP
#pragma omp parallel for schedule(static) if (go_parallel)
#endif
  for (int task = 0; task < tasks; ++task) {
    if (failure) continue;
    try {
      run_task(task);
    } catch (...) {
#ifdef PVS_HAVE_OPENMP
#pragma omp critical(pvs_expand_failure)
#endif
      {
        if (!failure) failure = std::current_exception();
      }
    }
  }
  (void)go_parallel;
  if (failure) std::rethrow_exception(failure);
  return out;
}

ModelExpansion exact_linear_expansion(const LinearGaussianModel& model,
                                      const std::vector<Eigen::VectorXd>& observations) {
  const int T = static_cast<int>(observations.size());
  ModelExpansion out;
  out.dyn.assign(T, regression_to_dyn_quadratic({model.A(), model.b(), model.Q()}));
  out.meas.assign(T + 1, Quadratic::zero(model.dim_x()));
  const AffineRegression meas_reg{model.H(), model.e(), model.R()};
  for (int k = 1; k <= T; ++k)
    out.meas[k] = regression_to_meas_quadratic(meas_reg, observations[k - 1]);
  out.prior = prior_moment_match(model.prior_moments());
  return out;
}

}  // namespace pvs
