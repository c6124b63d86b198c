// Timing comparison of the serial reference kernels against the OpenMP paths.
// Build target: pvs_bench. Not part of ctest; run manually.

#include <chrono>
#include <cstdio>

#include "pvs/baseline.hpp"
#include "pvs/expansions.hpp"
#include "pvs/fpvs.hpp"

using namespace pvs;

namespace {

template <class F>
double time_ms(F&& fn, int reps) {
  // one warmup, then best of reps
  fn();
  double best = 1e300;
  for (int i = 0; i < reps; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    const auto t1 = std::chrono::steady_clock::now();
    best = std::min(best, std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  return best;
}

void report(const char* name, double serial_ms, double parallel_ms) {
  std::printf("%-28s %10.2f ms %10.2f ms %8.2fx\n", name, serial_ms, parallel_ms,
              serial_ms / parallel_ms);
}

}  // namespace

int main() {
  std::printf("%-28s %13s %13s %9s\n", "kernel", "serial", "parallel", "speedup");

  {
    const PendulumModel model = pendulum_model();
    const int T = 2000;
    const Trajectory traj = simulate(model, T, 1);
    const ForwardPosterior init = prior_predictive_posterior(model, T);
    const std::vector<Gaussian> margs = forward_marginals(init);
    std::vector<PairGaussian> joints;
    for (int k = 0; k < T; ++k) joints.push_back(pairwise_joint(margs[k], init.conditionals[k]));

    for (ExpansionMethod method : {ExpansionMethod::gslr, ExpansionMethod::fourier_hermite}) {
      const char* name = method == ExpansionMethod::gslr ? "expand_model gslr T=2000"
                                                         : "expand_model fh   T=2000";
      const double s = time_ms(
          [&] {
            expand_model(model, traj.observations, margs, joints, method, {},
                         ExecPolicy::serial);
          },
          3);
      const double p = time_ms(
          [&] {
            expand_model(model, traj.observations, margs, joints, method, {},
                         ExecPolicy::parallel);
          },
          3);
      report(name, s, p);
    }
  }

  {
    const StochasticVolatilityModel model = stochastic_volatility_model();
    const Trajectory traj = simulate(model, 3, 5);
    const GridSpec grid{-8.0, 8.0, 3001};
    const double s = time_ms(
        [&] { grid_smoother_1d(model, traj.observations, grid, ExecPolicy::serial); }, 2);
    const double p = time_ms(
        [&] { grid_smoother_1d(model, traj.observations, grid, ExecPolicy::parallel); }, 2);
    report("grid_smoother n=3001 T=3", s, p);
  }

  return 0;
}
