#include "pvs/baseline.hpp"

#include <cmath>
#include <limits>

#include "pvs/errors.hpp"

namespace pvs {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

}  // namespace

RtsResult kalman_rts(const LinearGaussianModel& model,
                     const std::vector<Eigen::VectorXd>& observations) {
  const int T = static_cast<int>(observations.size());
  const int d = model.dim_x();
  const Eigen::MatrixXd& A = model.A();
  const Eigen::MatrixXd& H = model.H();
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(d, d);

  RtsResult res;
  res.filtered.resize(T + 1);
  res.predicted.resize(T);
  res.smoothed.resize(T + 1);
  res.filtered[0] = model.prior_moments();

  for (int k = 0; k < T; ++k) {
    Gaussian pred;
    pred.mean = A * res.filtered[k].mean + model.b();
    pred.cov = symmetrized(A * res.filtered[k].cov * A.transpose() + model.Q());
    res.predicted[k] = pred;

    const Eigen::VectorXd innov = observations[k] - (H * pred.mean + model.e());
    const Eigen::MatrixXd innov_cov =
        symmetrized(H * pred.cov * H.transpose() + model.R());
    auto llt_s = try_cholesky(innov_cov);
    if (!llt_s) throw DomainError("kalman_rts: innovation covariance not PD");
    const Eigen::MatrixXd gain = llt_s->solve(H * pred.cov).transpose();  // P H' S^-1

    Gaussian& filt = res.filtered[k + 1];
    filt.mean = pred.mean + gain * innov;
    // Joseph form keeps the oracle's covariances safely PSD
    const Eigen::MatrixXd ikh = eye - gain * H;
    filt.cov = symmetrized(ikh * pred.cov * ikh.transpose() +
                           gain * model.R() * gain.transpose());

    const Eigen::VectorXd white = llt_s->matrixL().solve(innov);
    res.log_likelihood +=
        -0.5 * (innov.size() * kLog2Pi + log_det(*llt_s) + white.squaredNorm());
  }

  res.smoothed[T] = res.filtered[T];
  for (int k = T - 1; k >= 0; --k) {
    auto llt_p = try_cholesky(res.predicted[k].cov);
    if (!llt_p) throw DomainError("kalman_rts: predicted covariance not PD");
    const Eigen::MatrixXd gain =
        llt_p->solve(A * res.filtered[k].cov).transpose();  // P_k A' Ppred^-1
    res.smoothed[k].mean =
        res.filtered[k].mean + gain * (res.smoothed[k + 1].mean - res.predicted[k].mean);
    res.smoothed[k].cov = symmetrized(
        res.filtered[k].cov +
        gain * (res.smoothed[k + 1].cov - res.predicted[k].cov) * gain.transpose());
  }
  return res;
}

namespace {

double logsumexp(const std::vector<double>& v) {
  double mx = -std::numeric_limits<double>::infinity();
  for (double x : v) mx = std::max(mx, x);
  if (!std::isfinite(mx)) return mx;
  double acc = 0.0;
  for (double x : v) acc += std::exp(x - mx);
  return mx + std::log(acc);
}

}  // namespace

std::vector<std::pair<double, double>> grid_smoother_1d(
    const StateSpaceModel& model, const std::vector<Eigen::VectorXd>& observations,
    const GridSpec& grid, ExecPolicy exec) {
  if (model.dim_x() != 1) throw DomainError("grid_smoother_1d: requires a 1-D state");
  if (grid.points < 3 || !(grid.hi > grid.lo))
    throw DomainError("grid_smoother_1d: malformed grid");
  const int n = grid.points;
  const int T = static_cast<int>(observations.size());
  const double dx = (grid.hi - grid.lo) / (n - 1);
  const bool go_parallel = exec == ExecPolicy::parallel;
  (void)go_parallel;

  std::vector<double> x(n), logw(n);
  for (int j = 0; j < n; ++j) {
    x[j] = grid.lo + j * dx;
    logw[j] = std::log((j == 0 || j == n - 1) ? 0.5 * dx : dx);
  }
  auto vec1 = [](double v) {
    Eigen::VectorXd out(1);
    out(0) = v;
    return out;
  };

  // forward messages: log p(x_k, y_{1:k}) up to a common constant
  std::vector<std::vector<double>> fwd(T + 1, std::vector<double>(n));
  for (int j = 0; j < n; ++j) fwd[0][j] = model.prior_logpdf(vec1(x[j]));
  for (int k = 1; k <= T; ++k) {
    const std::vector<double>& prev = fwd[k - 1];
    std::vector<double>& cur = fwd[k];
#ifdef PVS_HAVE_OPENMP
#pragma omp parallel for schedule(static) if (go_parallel)
#endif
    for (int j = 0; j < n; ++j) {
      std::vector<double> row(n);
      for (int i = 0; i < n; ++i)
        row[i] = prev[i] + logw[i] + model.dyn_logpdf(k - 1, vec1(x[j]), vec1(x[i]));
      cur[j] = logsumexp(row) + model.meas_logpdf(k, observations[k - 1], vec1(x[j]));
    }
  }

  // backward messages: log p(y_{k+1:T} | x_k)
  std::vector<std::vector<double>> bwd(T + 1, std::vector<double>(n, 0.0));
  for (int k = T - 1; k >= 0; --k) {
    const std::vector<double>& next = bwd[k + 1];
    std::vector<double>& cur = bwd[k];
#ifdef PVS_HAVE_OPENMP
#pragma omp parallel for schedule(static) if (go_parallel)
#endif
    for (int i = 0; i < n; ++i) {
      std::vector<double> row(n);
      for (int j = 0; j < n; ++j)
        row[j] = logw[j] + model.dyn_logpdf(k, vec1(x[j]), vec1(x[i])) +
                 model.meas_logpdf(k + 1, observations[k], vec1(x[j])) + next[j];
      cur[i] = logsumexp(row);
    }
  }

  std::vector<std::pair<double, double>> moments(T + 1);
  for (int k = 0; k <= T; ++k) {
    std::vector<double> logp(n);
    for (int j = 0; j < n; ++j) logp[j] = fwd[k][j] + bwd[k][j] + logw[j];
    const double norm = logsumexp(logp);
    double edge_mass = 0.0, mean = 0.0;
    std::vector<double> p(n);
    for (int j = 0; j < n; ++j) {
      p[j] = std::exp(logp[j] - norm);
      mean += p[j] * x[j];
    }
    edge_mass = p[0] + p[n - 1];
    if (edge_mass > 1e-6)
      throw GridTooSmallError("grid_smoother_1d: smoothed mass at the grid edge at step " +
                              std::to_string(k));
    double var = 0.0;
    for (int j = 0; j < n; ++j) var += p[j] * (x[j] - mean) * (x[j] - mean);
    moments[k] = {mean, var};
  }
  return moments;
}

}  // namespace pvs
