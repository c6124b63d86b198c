#include "pvs/models.hpp"

#include <cmath>

#include "pvs/errors.hpp"

namespace pvs {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

double gauss_log_density(const Eigen::VectorXd& resid, const Eigen::MatrixXd& cov) {
  auto llt = try_cholesky(cov);
  if (!llt) throw DomainError("conditional covariance is not positive definite");
  const Eigen::VectorXd z = llt->matrixL().solve(resid);
  return -0.5 * (resid.size() * kLog2Pi + log_det(*llt) + z.squaredNorm());
}

double gauss_log_density_1d(double resid, double var) {
  return -0.5 * (kLog2Pi + std::log(var) + resid * resid / var);
}

}  // namespace

// ---------------------------------------------------------------------------
// linear-Gaussian

LinearGaussianModel::LinearGaussianModel(Eigen::MatrixXd A, Eigen::VectorXd b,
                                         Eigen::MatrixXd Q, Eigen::MatrixXd H,
                                         Eigen::VectorXd e, Eigen::MatrixXd R,
                                         Eigen::VectorXd mu0, Eigen::MatrixXd Lam0)
    : A_(std::move(A)), Q_(std::move(Q)), H_(std::move(H)), R_(std::move(R)),
      Lam0_(std::move(Lam0)), b_(std::move(b)), e_(std::move(e)), mu0_(std::move(mu0)) {
  const auto d = mu0_.size();
  const auto m = e_.size();
  if (A_.rows() != d || A_.cols() != d || Q_.rows() != d || Q_.cols() != d ||
      b_.size() != d || Lam0_.rows() != d || Lam0_.cols() != d || H_.rows() != m ||
      H_.cols() != d || R_.rows() != m || R_.cols() != m) {
    throw DomainError("linear_gaussian_model: shape mismatch");
  }
  if (!try_cholesky(Q_) || !try_cholesky(R_) || !try_cholesky(Lam0_))
    throw DomainError("linear_gaussian_model: Q, R, Lam0 must be SPD");
}

double LinearGaussianModel::prior_logpdf(const Eigen::VectorXd& x0) const {
  return gauss_log_density(x0 - mu0_, Lam0_);
}

Eigen::VectorXd LinearGaussianModel::dyn_cond_mean(int, const Eigen::VectorXd& x) const {
  return A_ * x + b_;
}

double LinearGaussianModel::dyn_logpdf(int, const Eigen::VectorXd& x_next,
                                       const Eigen::VectorXd& x) const {
  return gauss_log_density(x_next - (A_ * x + b_), Q_);
}

Eigen::VectorXd LinearGaussianModel::meas_cond_mean(int, const Eigen::VectorXd& x) const {
  return H_ * x + e_;
}

double LinearGaussianModel::meas_logpdf(int, const Eigen::VectorXd& y,
                                        const Eigen::VectorXd& x) const {
  return gauss_log_density(y - (H_ * x + e_), R_);
}

// ---------------------------------------------------------------------------
// stochastic volatility

StochasticVolatilityModel::StochasticVolatilityModel(double a, double q, double scale)
    : a_(a), q_(q), scale_(scale) {
  if (!(std::abs(a) < 1.0) || !(q > 0.0) || !(scale > 0.0))
    throw DomainError("stochastic_volatility_model: require |a| < 1, q > 0, scale > 0");
}

Gaussian StochasticVolatilityModel::prior_moments() const {
  Eigen::VectorXd m = Eigen::VectorXd::Zero(1);
  Eigen::MatrixXd p(1, 1);
  p(0, 0) = q_ * q_ / (1.0 - a_ * a_);
  return {m, p};
}

double StochasticVolatilityModel::prior_logpdf(const Eigen::VectorXd& x0) const {
  return gauss_log_density_1d(x0(0), q_ * q_ / (1.0 - a_ * a_));
}

Eigen::VectorXd StochasticVolatilityModel::dyn_cond_mean(int, const Eigen::VectorXd& x) const {
  return a_ * x;
}

Eigen::MatrixXd StochasticVolatilityModel::dyn_cond_cov(int, const Eigen::VectorXd&) const {
  Eigen::MatrixXd q(1, 1);
  q(0, 0) = q_ * q_;
  return q;
}

double StochasticVolatilityModel::dyn_logpdf(int, const Eigen::VectorXd& x_next,
                                             const Eigen::VectorXd& x) const {
  return gauss_log_density_1d(x_next(0) - a_ * x(0), q_ * q_);
}

Eigen::VectorXd StochasticVolatilityModel::meas_cond_mean(int, const Eigen::VectorXd&) const {
  return Eigen::VectorXd::Zero(1);
}

Eigen::MatrixXd StochasticVolatilityModel::meas_cond_cov(int, const Eigen::VectorXd& x) const {
  Eigen::MatrixXd r(1, 1);
  r(0, 0) = scale_ * scale_ * std::exp(x(0));
  return r;
}

double StochasticVolatilityModel::meas_logpdf(int, const Eigen::VectorXd& y,
                                              const Eigen::VectorXd& x) const {
  return gauss_log_density_1d(y(0), scale_ * scale_ * std::exp(x(0)));
}

// ---------------------------------------------------------------------------
// pendulum

PendulumModel::PendulumModel(double dt, double g_over_l, double q_c, double r_meas)
    : dt_(dt), g_over_l_(g_over_l), r_(r_meas) {
  if (!(dt > 0.0)) throw DomainError("pendulum_model: dt must be positive");
  Q_.resize(2, 2);
  Q_ << q_c * dt * dt * dt / 3.0, q_c * dt * dt / 2.0,
        q_c * dt * dt / 2.0,      q_c * dt;
}

Gaussian PendulumModel::prior_moments() const {
  Eigen::VectorXd m(2);
  m << 1.5, 0.0;
  return {m, 0.1 * Eigen::MatrixXd::Identity(2, 2)};
}

double PendulumModel::prior_logpdf(const Eigen::VectorXd& x0) const {
  const Gaussian p = prior_moments();
  return gauss_log_density(x0 - p.mean, p.cov);
}

Eigen::VectorXd PendulumModel::dyn_cond_mean(int, const Eigen::VectorXd& x) const {
  Eigen::VectorXd out(2);
  out << x(0) + x(1) * dt_, x(1) - g_over_l_ * std::sin(x(0)) * dt_;
  return out;
}

double PendulumModel::dyn_logpdf(int k, const Eigen::VectorXd& x_next,
                                 const Eigen::VectorXd& x) const {
  return gauss_log_density(x_next - dyn_cond_mean(k, x), Q_);
}

Eigen::VectorXd PendulumModel::meas_cond_mean(int, const Eigen::VectorXd& x) const {
  Eigen::VectorXd out(1);
  out(0) = std::sin(x(0));
  return out;
}

Eigen::MatrixXd PendulumModel::meas_cond_cov(int, const Eigen::VectorXd&) const {
  Eigen::MatrixXd r(1, 1);
  r(0, 0) = r_;
  return r;
}

double PendulumModel::meas_logpdf(int, const Eigen::VectorXd& y,
                                  const Eigen::VectorXd& x) const {
  return gauss_log_density_1d(y(0) - std::sin(x(0)), r_);
}

// ---------------------------------------------------------------------------
// factories

LinearGaussianModel linear_gaussian_model(const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                                          const Eigen::MatrixXd& Q, const Eigen::MatrixXd& H,
                                          const Eigen::VectorXd& e, const Eigen::MatrixXd& R_meas,
                                          const Eigen::VectorXd& mu0,
                                          const Eigen::MatrixXd& Lam0) {
  return LinearGaussianModel(A, b, Q, H, e, R_meas, mu0, Lam0);
}

StochasticVolatilityModel stochastic_volatility_model(double a, double q, double scale) {
  return StochasticVolatilityModel(a, q, scale);
}

PendulumModel pendulum_model(double dt, double g_over_l, double q_c, double r_meas) {
  return PendulumModel(dt, g_over_l, q_c, r_meas);
}

// ---------------------------------------------------------------------------
// simulation

double GaussianStream::next() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  // 53-bit uniforms drawn straight from the generator keep the stream
  // independent of standard-library distribution internals.
  auto uniform = [this] { return (gen_() >> 11) * 0x1.0p-53; };
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * M_PI * u2;
  spare_ = radius * std::sin(angle);
  has_spare_ = true;
  return radius * std::cos(angle);
}

Eigen::VectorXd GaussianStream::next_vec(int d) {
  Eigen::VectorXd v(d);
  for (int i = 0; i < d; ++i) v(i) = next();
  return v;
}

namespace {

Eigen::VectorXd draw(GaussianStream& stream, const Eigen::VectorXd& mean,
                     const Eigen::MatrixXd& cov) {
  auto llt = try_cholesky(cov);
  if (!llt) throw DomainError("simulate: conditional covariance is not positive definite");
  return mean + llt->matrixL() * stream.next_vec(static_cast<int>(mean.size()));
}

}  // namespace

Trajectory simulate(const StateSpaceModel& model, int horizon, std::uint64_t seed) {
  if (horizon < 1) throw DomainError("simulate: horizon must be >= 1");
  GaussianStream stream(seed);
  Trajectory traj;
  traj.seed = seed;
  traj.states.reserve(horizon + 1);
  traj.observations.reserve(horizon);

  const Gaussian prior = model.prior_moments();
  traj.states.push_back(draw(stream, prior.mean, prior.cov));
  for (int k = 0; k < horizon; ++k) {
    const Eigen::VectorXd& x = traj.states.back();
    traj.states.push_back(
        draw(stream, model.dyn_cond_mean(k, x), model.dyn_cond_cov(k, x)));
    const Eigen::VectorXd& xn = traj.states.back();
    traj.observations.push_back(
        draw(stream, model.meas_cond_mean(k + 1, xn), model.meas_cond_cov(k + 1, xn)));
  }
  return traj;
}

void write_trajectory_csv(const Trajectory& traj, std::ostream& os) {
  const int d = traj.states.empty() ? 0 : static_cast<int>(traj.states[0].size());
  const int m = traj.observations.empty() ? 0 : static_cast<int>(traj.observations[0].size());
  os << "k";
  for (int i = 0; i < d; ++i) os << ",x" << i;
  for (int i = 0; i < m; ++i) os << ",y" << i;
  os << "\n";
  char buf[32];
  auto put = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    os << ',' << buf;
  };
  for (std::size_t k = 0; k < traj.states.size(); ++k) {
    os << k;
    for (int i = 0; i < d; ++i) put(traj.states[k](i));
    for (int i = 0; i < m; ++i) {
      if (k == 0)
        os << ",nan";
      else
        put(traj.observations[k - 1](i));
    }
    os << "\n";
  }
}

}  // namespace pvs
