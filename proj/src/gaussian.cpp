#include "pvs/gaussian.hpp"

#include <cmath>
#include <vector>

namespace pvs {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

Eigen::LLT<Eigen::MatrixXd> require_spd(const Eigen::MatrixXd& m, const char* what) {
  auto llt = try_cholesky(m);
  if (!llt) throw DomainError(std::string(what) + " is not positive definite");
  return *llt;
}

}  // namespace

Gaussian PairGaussian::next_current() const {
  if (direction == Direction::forward) return joint;
  const int d = joint.dim() / 2;
  Gaussian out;
  out.mean.resize(2 * d);
  out.mean << joint.mean.tail(d), joint.mean.head(d);
  out.cov.resize(2 * d, 2 * d);
  out.cov.topLeftCorner(d, d) = joint.cov.bottomRightCorner(d, d);
  out.cov.bottomRightCorner(d, d) = joint.cov.topLeftCorner(d, d);
  out.cov.topRightCorner(d, d) = joint.cov.bottomLeftCorner(d, d);
  out.cov.bottomLeftCorner(d, d) = joint.cov.topRightCorner(d, d);
  return out;
}

double log_pdf(const Gaussian& marg, const Eigen::VectorXd& x) {
  if (x.size() != marg.mean.size()) throw DomainError("log_pdf: dimension mismatch");
  auto llt = require_spd(marg.cov, "covariance");
  const Eigen::VectorXd z = llt.matrixL().solve(x - marg.mean);
  return -0.5 * (marg.dim() * kLog2Pi + log_det(llt) + z.squaredNorm());
}

double gaussian_kl(const Gaussian& q, const Gaussian& p) {
  if (q.dim() != p.dim()) throw DomainError("gaussian_kl: dimension mismatch");
  auto llt_p = require_spd(p.cov, "covariance of p");
  auto llt_q = require_spd(q.cov, "covariance of q");
  const Eigen::VectorXd dm = p.mean - q.mean;
  const double quad = dm.dot(llt_p.solve(dm));
  const double tr = llt_p.solve(q.cov).trace();
  return 0.5 * (tr + quad - q.dim() + log_det(llt_p) - log_det(llt_q));
}

double log_integral_quadratic(const Quadratic& q) {
  auto llt = try_cholesky(q.curvature);
  if (!llt) throw NotIntegrableError("indefinite curvature in exponent");
  const double quad = q.linear.dot(llt->solve(q.linear));
  return 0.5 * (q.dim() * kLog2Pi - log_det(*llt)) + 0.5 * quad + q.constant;
}

std::pair<Gaussian, double> damped_gaussian_tilt(const Gaussian& prior,
                                                 const Quadratic& potential, double beta) {
  if (!(beta >= 0.0 && beta < 1.0)) throw DomainError("damped_gaussian_tilt: beta outside [0,1)");
  if (prior.dim() != potential.dim())
    throw DomainError("damped_gaussian_tilt: dimension mismatch");

  Quadratic combined;
  if (beta > 0.0) {
    auto llt = require_spd(prior.cov, "prior covariance");
    const Eigen::MatrixXd prec = inverse_spd(llt);
    combined.curvature = symmetrized((1.0 - beta) * potential.curvature + beta * prec);
    combined.linear = (1.0 - beta) * potential.linear + beta * (prec * prior.mean);
    combined.constant = (1.0 - beta) * potential.constant -
                        0.5 * beta * (prior.dim() * kLog2Pi + log_det(llt) +
                                      prior.mean.dot(prec * prior.mean));
  } else {
    combined = potential;
  }

  auto llt = try_cholesky(combined.curvature);
  if (!llt) throw NotIntegrableError("combined tilt precision is not positive definite");
  Gaussian out;
  out.cov = inverse_spd(*llt);
  out.mean = llt->solve(combined.linear);
  const double log_z = log_integral_quadratic(combined);
  return {out, log_z};
}

namespace {

// Extended-precision evaluation of the tilt log-normalizer as a function of
// the prior mean. Double precision would leave the central second differences
// dominated by rounding noise at the default step.
class TiltLogZProbe {
 public:
  TiltLogZProbe(const Gaussian& prior, const Quadratic& potential, double beta)
      : d_(prior.dim()), beta_(beta) {
    prior_prec_ = to_long(inverse_spd(*try_cholesky(prior.cov)));
    const std::vector<long double> prior_chol = cholesky(to_long(prior.cov));
    log_det_prior_ = 0.0L;
    for (int i = 0; i < d_; ++i) log_det_prior_ += 2.0L * std::log(prior_chol[i * d_ + i]);

    std::vector<long double> combined(d_ * d_);
    for (int i = 0; i < d_ * d_; ++i)
      combined[i] = (1.0L - (long double)beta) * (long double)potential.curvature(i / d_, i % d_) +
                    (long double)beta * prior_prec_[i];
    combined_chol_ = cholesky(combined);
    log_det_combined_ = 0.0L;
    for (int i = 0; i < d_; ++i) log_det_combined_ += 2.0L * std::log(combined_chol_[i * d_ + i]);

    lin_.resize(d_);
    for (int i = 0; i < d_; ++i) lin_[i] = (long double)potential.linear(i);
    rho_ = (long double)potential.constant;
  }

  long double operator()(const std::vector<long double>& m) const {
    constexpr long double log2pi = 1.837877066409345483560659472811L;
    std::vector<long double> prec_m(d_, 0.0L);
    for (int i = 0; i < d_; ++i)
      for (int j = 0; j < d_; ++j) prec_m[i] += prior_prec_[i * d_ + j] * m[j];
    long double m_prec_m = 0.0L;
    for (int i = 0; i < d_; ++i) m_prec_m += m[i] * prec_m[i];

    std::vector<long double> u(d_);
    for (int i = 0; i < d_; ++i)
      u[i] = (1.0L - (long double)beta_) * lin_[i] + (long double)beta_ * prec_m[i];
    std::vector<long double> solved = u;
    solve_inplace(combined_chol_, solved);
    long double quad = 0.0L;
    for (int i = 0; i < d_; ++i) quad += u[i] * solved[i];

    const long double constant =
        (1.0L - (long double)beta_) * rho_ -
        0.5L * (long double)beta_ * (d_ * log2pi + log_det_prior_ + m_prec_m);
    return 0.5L * (d_ * log2pi - log_det_combined_) + 0.5L * quad + constant;
  }

 private:
  std::vector<long double> to_long(const Eigen::MatrixXd& m) const {
    std::vector<long double> out(m.rows() * m.cols());
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j) out[i * m.cols() + j] = (long double)m(i, j);
    return out;
  }

  std::vector<long double> cholesky(std::vector<long double> a) const {
    std::vector<long double> l(d_ * d_, 0.0L);
    for (int i = 0; i < d_; ++i) {
      for (int j = 0; j <= i; ++j) {
        long double acc = a[i * d_ + j];
        for (int p = 0; p < j; ++p) acc -= l[i * d_ + p] * l[j * d_ + p];
        if (i == j) {
          if (!(acc > 0.0L))
            throw NotIntegrableError("combined tilt precision is not positive definite");
          l[i * d_ + i] = std::sqrt(acc);
        } else {
          l[i * d_ + j] = acc / l[j * d_ + j];
        }
      }
    }
    return l;
  }

  void solve_inplace(const std::vector<long double>& l, std::vector<long double>& b) const {
    for (int i = 0; i < d_; ++i) {
      for (int j = 0; j < i; ++j) b[i] -= l[i * d_ + j] * b[j];
      b[i] /= l[i * d_ + i];
    }
    for (int i = d_ - 1; i >= 0; --i) {
      for (int j = i + 1; j < d_; ++j) b[i] -= l[j * d_ + i] * b[j];
      b[i] /= l[i * d_ + i];
    }
  }

  int d_;
  double beta_;
  std::vector<long double> prior_prec_, combined_chol_, lin_;
  long double log_det_prior_ = 0.0L, log_det_combined_ = 0.0L, rho_ = 0.0L;
};

}  // namespace

std::pair<double, double> tilt_moment_check(const Gaussian& prior, const Quadratic& potential,
                                            double beta, double h) {
  if (!(beta > 0.0 && beta < 1.0)) throw DomainError("tilt_moment_check: beta outside (0,1)");
  const int d = prior.dim();
  auto [exact, log_z0] = damped_gaussian_tilt(prior, potential, beta);
  (void)log_z0;

  const TiltLogZProbe log_z(prior, potential, beta);
  std::vector<long double> base(d);
  for (int i = 0; i < d; ++i) base[i] = (long double)prior.mean(i);
  const long double z0 = log_z(base);

  auto at = [&](int i, long double di, int j, long double dj) {
    std::vector<long double> m = base;
    m[i] += di;
    if (j >= 0) m[j] += dj;
    return log_z(m);
  };

  std::vector<long double> step(d);
  for (int i = 0; i < d; ++i) step[i] = (long double)h * (1.0L + std::abs(base[i]));

  Eigen::VectorXd grad(d);
  Eigen::MatrixXd hess(d, d);
  for (int i = 0; i < d; ++i) {
    const long double zp = at(i, step[i], -1, 0.0L);
    const long double zm = at(i, -step[i], -1, 0.0L);
    grad(i) = (double)((zp - zm) / (2.0L * step[i]));
    hess(i, i) = (double)((zp - 2.0L * z0 + zm) / (step[i] * step[i]));
  }
  for (int i = 0; i < d; ++i) {
    for (int j = i + 1; j < d; ++j) {
      const long double cross = at(i, step[i], j, step[j]) - at(i, step[i], j, -step[j]) -
                                at(i, -step[i], j, step[j]) + at(i, -step[i], j, -step[j]);
      hess(i, j) = (double)(cross / (4.0L * step[i] * step[j]));
      hess(j, i) = hess(i, j);
    }
  }

  const Eigen::VectorXd mean_fd = prior.mean + (1.0 / beta) * (prior.cov * grad);
  const Eigen::MatrixXd cov_fd =
      prior.cov / beta + (prior.cov * hess * prior.cov) / (beta * beta);
  const double mean_err = (mean_fd - exact.mean).cwiseAbs().maxCoeff();
  const double cov_err = (cov_fd - exact.cov).cwiseAbs().maxCoeff();
  return {mean_err, cov_err};
}

Gaussian marginalize_affine(const Gaussian& marg, const AffineConditional& cond) {
  if (cond.gain.cols() != marg.dim()) throw DomainError("marginalize_affine: shape mismatch");
  Gaussian out;
  out.mean = cond.gain * marg.mean + cond.offset;
  out.cov = symmetrized(cond.gain * marg.cov * cond.gain.transpose() + cond.noise_cov);
  return out;
}

PairGaussian pairwise_joint(const Gaussian& marg, const AffineConditional& cond) {
  if (cond.gain.cols() != marg.dim()) throw DomainError("pairwise_joint: shape mismatch");
  const int dp = marg.dim();
  const int dc = static_cast<int>(cond.offset.size());
  const Gaussian child = marginalize_affine(marg, cond);
  const Eigen::MatrixXd cross = cond.gain * marg.cov;  // C[child, parent]

  PairGaussian out;
  out.direction = cond.direction;
  out.joint.mean.resize(dc + dp);
  out.joint.mean << child.mean, marg.mean;
  out.joint.cov.resize(dc + dp, dc + dp);
  out.joint.cov.topLeftCorner(dc, dc) = child.cov;
  out.joint.cov.topRightCorner(dc, dp) = cross;
  out.joint.cov.bottomLeftCorner(dp, dc) = cross.transpose();
  out.joint.cov.bottomRightCorner(dp, dp) = marg.cov;
  return out;
}

double expected_conditional_kl(const Gaussian& marg, const AffineConditional& next,
                               const AffineConditional& old) {
  if (next.direction != old.direction)
    throw DomainError("expected_conditional_kl: mixed directions");
  auto llt_old = require_spd(old.noise_cov, "old noise covariance");
  auto llt_new = require_spd(next.noise_cov, "new noise covariance");
  const int d = static_cast<int>(next.offset.size());

  const Eigen::MatrixXd dF = next.gain - old.gain;
  const Eigen::VectorXd dmean = dF * marg.mean + (next.offset - old.offset);
  const double quad = dmean.dot(llt_old.solve(dmean)) +
                      llt_old.solve(dF * marg.cov * dF.transpose()).trace();
  const double tr = llt_old.solve(next.noise_cov).trace();
  return 0.5 * (tr + quad - d + log_det(llt_old) - log_det(llt_new));
}

}  // namespace pvs
