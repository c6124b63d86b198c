#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "pvs/baseline.hpp"
#include "pvs/hpvs.hpp"
#include "support.hpp"

using namespace pvs;

namespace {

LinearGaussianModel random_linear(std::mt19937_64& gen, int d, int m) {
  Eigen::MatrixXd A = testsupport::random_matrix(d, d, gen);
  const double radius = std::abs(A.eigenvalues().array().abs().maxCoeff());
  if (radius > 0.95) A *= 0.95 / radius;
  return linear_gaussian_model(A, testsupport::random_vec(d, gen),
                               testsupport::random_spd(d, gen),
                               testsupport::random_matrix(m, d, gen),
                               testsupport::random_vec(m, gen), testsupport::random_spd(m, gen),
                               testsupport::random_vec(d, gen), testsupport::random_spd(d, gen));
}

}  // namespace

TEST_CASE("undamped hybrid fusion reproduces RTS") {
  std::mt19937_64 gen(7);
  for (int trial = 0; trial < 6; ++trial) {
    const int d = 1 + static_cast<int>(gen() % 3);
    const int T = 4 + static_cast<int>(gen() % 8);
    const LinearGaussianModel model = random_linear(gen, d, 1);
    const Trajectory traj = simulate(model, T, gen());
    const ModelExpansion ex = exact_linear_expansion(model, traj.observations);
    const HybridState init = hybrid_prior_predictive(model, T);

    const BackwardPassOutput fwd = forward_backward_pass(0.0, ex, init.fwd);
    const ForwardPassOutput rev = reverse_forward_pass(0.0, ex, init.rev);
    const std::vector<Gaussian> fused =
        hybrid_marginals(0.0, init.marginals, fwd.normalizers, rev.potentials,
                         fwd.posterior.first, rev.posterior.last);
    const RtsResult rts = kalman_rts(model, traj.observations);
    for (int k = 0; k <= T; ++k) {
      const double mean_err = (fused[k].mean - rts.smoothed[k].mean).cwiseAbs().maxCoeff() /
                              (1.0 + rts.smoothed[k].mean.cwiseAbs().maxCoeff());
      const double cov_err = (fused[k].cov - rts.smoothed[k].cov).cwiseAbs().maxCoeff() /
                             (1.0 + rts.smoothed[k].cov.cwiseAbs().maxCoeff());
      CHECK(mean_err < 1e-8);
      CHECK(cov_err < 1e-8);
    }
  }
}

TEST_CASE("the two passes commute and fusion is bit-stable") {
  std::mt19937_64 gen(17);
  const LinearGaussianModel model = random_linear(gen, 2, 1);
  const Trajectory traj = simulate(model, 8, 5);
  const ModelExpansion ex = exact_linear_expansion(model, traj.observations);
  const HybridState init = hybrid_prior_predictive(model, 8);

  // forward first
  const BackwardPassOutput f1 = forward_backward_pass(0.3, ex, init.fwd);
  const ForwardPassOutput r1 = reverse_forward_pass(0.3, ex, init.rev);
  // reverse first
  const ForwardPassOutput r2 = reverse_forward_pass(0.3, ex, init.rev);
  const BackwardPassOutput f2 = forward_backward_pass(0.3, ex, init.fwd);

  const std::vector<Gaussian> a = hybrid_marginals(
      0.3, init.marginals, f1.normalizers, r1.potentials, f1.posterior.first, r1.posterior.last);
  const std::vector<Gaussian> b = hybrid_marginals(
      0.3, init.marginals, f2.normalizers, r2.potentials, f2.posterior.first, r2.posterior.last);
  for (std::size_t k = 0; k < a.size(); ++k) {
    CHECK(a[k].mean == b[k].mean);
    CHECK(a[k].cov == b[k].cov);
  }
}

TEST_CASE("hybrid freezing limit") {
  std::mt19937_64 gen(23);
  const LinearGaussianModel model = random_linear(gen, 2, 1);
  const Trajectory traj = simulate(model, 10, 5);
  const ModelExpansion ex = exact_linear_expansion(model, traj.observations);
  const HybridState init = hybrid_prior_predictive(model, 10);

  const double beta = 1.0 - 1e-9;
  const BackwardPassOutput fwd = forward_backward_pass(beta, ex, init.fwd);
  const ForwardPassOutput rev = reverse_forward_pass(beta, ex, init.rev);
  const std::vector<Gaussian> fused =
      hybrid_marginals(beta, init.marginals, fwd.normalizers, rev.potentials,
                       fwd.posterior.first, rev.posterior.last);
  for (int k = 0; k <= 10; ++k) {
    const double mean_change = (fused[k].mean - init.marginals[k].mean).cwiseAbs().maxCoeff() /
                               (1.0 + init.marginals[k].mean.cwiseAbs().maxCoeff());
    const double cov_change = (fused[k].cov - init.marginals[k].cov).cwiseAbs().maxCoeff() /
                              (1.0 + init.marginals[k].cov.cwiseAbs().maxCoeff());
    CHECK(mean_change <= 1e-6);
    CHECK(cov_change <= 1e-6);
  }
}

TEST_CASE("run_hpvs converges to RTS on linear models") {
  std::mt19937_64 gen(29);
  const LinearGaussianModel model = random_linear(gen, 2, 1);
  const Trajectory traj = simulate(model, 10, 9);
  DampingConfig cfg;
  cfg.epsilon = 1e6;
  // the fused fixed point inherits an O(beta_min) offset, so push alpha_min down
  cfg.alpha_min = 1e-9;
  const HpvsResult res = run_hpvs(model, traj.observations, ExpansionMethod::gslr, {}, cfg,
                                  hybrid_prior_predictive(model, 10), 10, 1e-6);
  CHECK(res.converged);
  CHECK(res.iterations <= 3);
  const RtsResult rts = kalman_rts(model, traj.observations);
  for (int k = 0; k <= 10; ++k) {
    CHECK((res.marginals[k].mean - rts.smoothed[k].mean).cwiseAbs().maxCoeff() < 1e-6);
    CHECK((res.marginals[k].cov - rts.smoothed[k].cov).cwiseAbs().maxCoeff() < 1e-6);
  }
  // at an exact fixed point the two paths coincide
  CHECK(res.path_discrepancy.back() < 1e-6);
}

TEST_CASE("run_hpvs with max_iters=0 returns init unchanged") {
  std::mt19937_64 gen(31);
  const LinearGaussianModel model = random_linear(gen, 1, 1);
  const Trajectory traj = simulate(model, 5, 2);
  const HybridState init = hybrid_prior_predictive(model, 5);
  DampingConfig cfg;
  cfg.epsilon = 1.0;
  const HpvsResult res =
      run_hpvs(model, traj.observations, ExpansionMethod::gslr, {}, cfg, init, 0, 1e-6);
  CHECK(res.iterations == 0);
  for (int k = 0; k <= 5; ++k)
    CHECK((res.marginals[k].mean - init.marginals[k].mean).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("run_hpvs agrees with run_fpvs on the pendulum at convergence") {
  const PendulumModel model = pendulum_model();
  const int T = 100;
  const Trajectory traj = simulate(model, T, 11);
  DampingConfig cfg;
  cfg.epsilon = 0.1 * (T + 1) * 2;
  const HpvsResult hyb = run_hpvs(model, traj.observations, ExpansionMethod::gslr, {}, cfg,
                                  hybrid_prior_predictive(model, T), 50, 1e-6);
  const FpvsResult fwd = run_fpvs(model, traj.observations, ExpansionMethod::gslr, {}, cfg,
                                  prior_predictive_posterior(model, T), 50, 1e-6);
  CHECK(hyb.converged);
  CHECK(fwd.converged);
  double acc = 0.0;
  int count = 0;
  for (int k = 0; k <= T; ++k) {
    acc += (hyb.marginals[k].mean - fwd.marginals[k].mean).squaredNorm();
    count += 2;
  }
  CHECK(std::sqrt(acc / count) < 1e-3);
}

TEST_CASE("hybrid trust region from the trace") {
  const PendulumModel model = pendulum_model();
  const int T = 60;
  const Trajectory traj = simulate(model, T, 13);
  DampingConfig cfg;
  cfg.epsilon = 0.1 * (T + 1) * 2;
  const HpvsResult res = run_hpvs(model, traj.observations, ExpansionMethod::gslr, {}, cfg,
                                  hybrid_prior_predictive(model, T), 40, 1e-6);
  const double beta_min = cfg.alpha_min / (1.0 + cfg.alpha_min);
  for (const IterationRecord& rec : res.trace) {
    const bool tight = std::abs(rec.kl - cfg.epsilon) <= cfg.kl_rel_tol * cfg.epsilon;
    const bool slack = rec.kl < cfg.epsilon && rec.beta <= beta_min * (1.0 + 1e-9);
    CHECK((tight || slack));
  }
}
