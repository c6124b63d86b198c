#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <ostream>
#include <random>
#include <vector>

#include "pvs/gaussian.hpp"

namespace pvs {

/// Nonlinear, non-Gaussian state-space model: prior over x_0, Markov dynamics
/// x_{k+1} ~ f_k(.|x_k), observations y_k ~ h_k(.|x_k) for k = 1..T.
/// Conditional means/covariances must exist; conditional covariances are SPD
/// on the support exercised by inference. Implementations are immutable and
/// safe to share across threads.
class StateSpaceModel {
 public:
  virtual ~StateSpaceModel() = default;

  virtual int dim_x() const = 0;
  virtual int dim_y() const = 0;

  virtual Gaussian prior_moments() const = 0;
  virtual double prior_logpdf(const Eigen::VectorXd& x0) const = 0;

  virtual Eigen::VectorXd dyn_cond_mean(int k, const Eigen::VectorXd& x) const = 0;
  virtual Eigen::MatrixXd dyn_cond_cov(int k, const Eigen::VectorXd& x) const = 0;
  virtual double dyn_logpdf(int k, const Eigen::VectorXd& x_next,
                            const Eigen::VectorXd& x) const = 0;

  virtual Eigen::VectorXd meas_cond_mean(int k, const Eigen::VectorXd& x) const = 0;
  virtual Eigen::MatrixXd meas_cond_cov(int k, const Eigen::VectorXd& x) const = 0;
  virtual double meas_logpdf(int k, const Eigen::VectorXd& y,
                             const Eigen::VectorXd& x) const = 0;
};

/// x_{k+1} = A x_k + b + w, y_k = H x_k + e + v, Gaussian prior. The one model
/// family whose smoothing posterior the exact baseline can compute.
class LinearGaussianModel : public StateSpaceModel {
 public:
  LinearGaussianModel(Eigen::MatrixXd A, Eigen::VectorXd b, Eigen::MatrixXd Q,
                      Eigen::MatrixXd H, Eigen::VectorXd e, Eigen::MatrixXd R,
                      Eigen::VectorXd mu0, Eigen::MatrixXd Lam0);

  int dim_x() const override { return static_cast<int>(mu0_.size()); }
  int dim_y() const override { return static_cast<int>(e_.size()); }
  Gaussian prior_moments() const override { return {mu0_, Lam0_}; }
  double prior_logpdf(const Eigen::VectorXd& x0) const override;
  Eigen::VectorXd dyn_cond_mean(int, const Eigen::VectorXd& x) const override;
  Eigen::MatrixXd dyn_cond_cov(int, const Eigen::VectorXd&) const override { return Q_; }
  double dyn_logpdf(int, const Eigen::VectorXd& x_next, const Eigen::VectorXd& x) const override;
  Eigen::VectorXd meas_cond_mean(int, const Eigen::VectorXd& x) const override;
  Eigen::MatrixXd meas_cond_cov(int, const Eigen::VectorXd&) const override { return R_; }
  double meas_logpdf(int, const Eigen::VectorXd& y, const Eigen::VectorXd& x) const override;

  const Eigen::MatrixXd& A() const { return A_; }
  const Eigen::VectorXd& b() const { return b_; }
  const Eigen::MatrixXd& Q() const { return Q_; }
  const Eigen::MatrixXd& H() const { return H_; }
  const Eigen::VectorXd& e() const { return e_; }
  const Eigen::MatrixXd& R() const { return R_; }

 private:
  Eigen::MatrixXd A_, Q_, H_, R_, Lam0_;
  Eigen::VectorXd b_, e_, mu0_;
};

/// AR(1) log-volatility with multiplicative observation noise:
/// x_{k+1} = a x_k + w, w ~ N(0, q^2); y_k ~ N(0, scale^2 exp(x_k)).
/// Prior is the stationary law N(0, q^2 / (1 - a^2)).
class StochasticVolatilityModel : public StateSpaceModel {
 public:
  StochasticVolatilityModel(double a, double q, double scale);

  int dim_x() const override { return 1; }
  int dim_y() const override { return 1; }
  Gaussian prior_moments() const override;
  double prior_logpdf(const Eigen::VectorXd& x0) const override;
  Eigen::VectorXd dyn_cond_mean(int, const Eigen::VectorXd& x) const override;
  Eigen::MatrixXd dyn_cond_cov(int, const Eigen::VectorXd&) const override;
  double dyn_logpdf(int, const Eigen::VectorXd& x_next, const Eigen::VectorXd& x) const override;
  Eigen::VectorXd meas_cond_mean(int, const Eigen::VectorXd&) const override;
  Eigen::MatrixXd meas_cond_cov(int, const Eigen::VectorXd& x) const override;
  double meas_logpdf(int, const Eigen::VectorXd& y, const Eigen::VectorXd& x) const override;

  double a() const { return a_; }
  double q() const { return q_; }
  double scale() const { return scale_; }

 private:
  double a_, q_, scale_;
};

/// Euler-discretized pendulum, state (angle, velocity), measurement
/// y = sin(angle) + noise. Nonlinear in both dynamics and measurement.
class PendulumModel : public StateSpaceModel {
 public:
  PendulumModel(double dt, double g_over_l, double q_c, double r_meas);

  int dim_x() const override { return 2; }
  int dim_y() const override { return 1; }
  Gaussian prior_moments() const override;
  double prior_logpdf(const Eigen::VectorXd& x0) const override;
  Eigen::VectorXd dyn_cond_mean(int, const Eigen::VectorXd& x) const override;
  Eigen::MatrixXd dyn_cond_cov(int, const Eigen::VectorXd&) const override { return Q_; }
  double dyn_logpdf(int, const Eigen::VectorXd& x_next, const Eigen::VectorXd& x) const override;
  Eigen::VectorXd meas_cond_mean(int, const Eigen::VectorXd& x) const override;
  Eigen::MatrixXd meas_cond_cov(int, const Eigen::VectorXd&) const override;
  double meas_logpdf(int, const Eigen::VectorXd& y, const Eigen::VectorXd& x) const override;

 private:
  double dt_, g_over_l_, r_;
  Eigen::MatrixXd Q_;
};

LinearGaussianModel linear_gaussian_model(const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                                          const Eigen::MatrixXd& Q, const Eigen::MatrixXd& H,
                                          const Eigen::VectorXd& e, const Eigen::MatrixXd& R_meas,
                                          const Eigen::VectorXd& mu0, const Eigen::MatrixXd& Lam0);
StochasticVolatilityModel stochastic_volatility_model(double a = 0.97, double q = 0.15,
                                                      double scale = 0.65);
PendulumModel pendulum_model(double dt = 0.01, double g_over_l = 9.81, double q_c = 0.01,
                             double r_meas = 0.1);

/// Seeded Gaussian stream: Box-Muller over a 64-bit Mersenne twister, so draws
/// depend only on the seed and call order.
class GaussianStream {
 public:
  explicit GaussianStream(std::uint64_t seed) : gen_(seed) {}
  double next();
  Eigen::VectorXd next_vec(int d);

 private:
  std::mt19937_64 gen_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

struct Trajectory {
  std::vector<Eigen::VectorXd> states;        // x_0..x_T
  std::vector<Eigen::VectorXd> observations;  // y_1..y_T (index k-1)
  std::uint64_t seed = 0;
};

/// Ancestral simulation of `horizon` steps; deterministic given the seed.
Trajectory simulate(const StateSpaceModel& model, int horizon, std::uint64_t seed);

/// CSV with columns k, x[0..d), y[0..m); the y columns of row 0 are nan.
void write_trajectory_csv(const Trajectory& traj, std::ostream& os);

}  // namespace pvs
