#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "pvs/baseline.hpp"
#include "pvs/expansions.hpp"
#include "pvs/fpvs.hpp"
#include "support.hpp"

using namespace pvs;

// the OpenMP kernels are pure maps over independent work items, so the
// parallel path must reproduce the serial reference bit for bit

namespace {

bool same_bits(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
  return std::memcmp(a.data(), b.data(), sizeof(double) * a.size()) == 0;
}

}  // namespace

TEST_CASE("expand_model serial and parallel are bit-identical") {
  const PendulumModel model = pendulum_model();
  const int T = 64;
  const Trajectory traj = simulate(model, T, 3);
  const ForwardPosterior init = prior_predictive_posterior(model, T);
  const std::vector<Gaussian> margs = forward_marginals(init);
  std::vector<PairGaussian> joints;
  for (int k = 0; k < T; ++k) joints.push_back(pairwise_joint(margs[k], init.conditionals[k]));

  for (ExpansionMethod method : {ExpansionMethod::gslr, ExpansionMethod::fourier_hermite}) {
    const ModelExpansion serial = expand_model(model, traj.observations, margs, joints, method,
                                               {}, ExecPolicy::serial);
    const ModelExpansion parallel = expand_model(model, traj.observations, margs, joints, method,
                                                 {}, ExecPolicy::parallel);
    for (int k = 0; k < T; ++k) {
      CHECK(same_bits(serial.dyn[k].block_nn, parallel.dyn[k].block_nn));
      CHECK(same_bits(serial.dyn[k].block_cc, parallel.dyn[k].block_cc));
      CHECK(same_bits(serial.dyn[k].block_nc, parallel.dyn[k].block_nc));
      CHECK(same_bits(serial.dyn[k].lin_n, parallel.dyn[k].lin_n));
      CHECK(same_bits(serial.dyn[k].lin_c, parallel.dyn[k].lin_c));
      CHECK(serial.dyn[k].constant == parallel.dyn[k].constant);
      CHECK(same_bits(serial.meas[k + 1].curvature, parallel.meas[k + 1].curvature));
      CHECK(same_bits(serial.meas[k + 1].linear, parallel.meas[k + 1].linear));
      CHECK(serial.meas[k + 1].constant == parallel.meas[k + 1].constant);
    }
    CHECK(same_bits(serial.prior.curvature, parallel.prior.curvature));
  }
}

TEST_CASE("grid smoother serial and parallel are bit-identical") {
  const StochasticVolatilityModel model = stochastic_volatility_model();
  const Trajectory traj = simulate(model, 4, 3);
  const auto serial = grid_smoother_1d(model, traj.observations, {-8.0, 8.0, 801},
                                       ExecPolicy::serial);
  const auto parallel = grid_smoother_1d(model, traj.observations, {-8.0, 8.0, 801},
                                         ExecPolicy::parallel);
  REQUIRE(serial.size() == parallel.size());
  for (std::size_t k = 0; k < serial.size(); ++k) {
    CHECK(serial[k].first == parallel[k].first);
    CHECK(serial[k].second == parallel[k].second);
  }
}

TEST_CASE("run_fpvs is exec-policy invariant end to end") {
  const PendulumModel model = pendulum_model();
  const int T = 30;
  const Trajectory traj = simulate(model, T, 21);
  DampingConfig cfg;
  cfg.epsilon = 0.1 * (T + 1) * 2;
  const FpvsResult a = run_fpvs(model, traj.observations, ExpansionMethod::fourier_hermite, {},
                                cfg, prior_predictive_posterior(model, T), 20, 1e-6,
                                ExecPolicy::serial);
  const FpvsResult b = run_fpvs(model, traj.observations, ExpansionMethod::fourier_hermite, {},
                                cfg, prior_predictive_posterior(model, T), 20, 1e-6,
                                ExecPolicy::parallel);
  REQUIRE(a.iterations == b.iterations);
  for (int k = 0; k <= T; ++k) {
    CHECK(same_bits(a.marginals[k].mean, b.marginals[k].mean));
    CHECK(same_bits(a.marginals[k].cov, b.marginals[k].cov));
  }
}
