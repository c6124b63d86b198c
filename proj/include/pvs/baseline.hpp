#pragma once

#include <utility>
#include <vector>

#include "pvs/exec.hpp"
#include "pvs/gaussian.hpp"
#include "pvs/models.hpp"

namespace pvs {

struct RtsResult {
  std::vector<Gaussian> filtered;   // k = 0..T, filtered[0] is the prior
  std::vector<Gaussian> predicted;  // k = 0..T-1, predicted[k] = p(x_{k+1} | y_{1:k})
  std::vector<Gaussian> smoothed;   // k = 0..T
  double log_likelihood = 0.0;
};

/// Exact Kalman filter (Joseph-form update) plus RTS smoothing pass and the
/// exact log marginal likelihood. The artifact's linear-Gaussian oracle.
RtsResult kalman_rts(const LinearGaussianModel& model,
                     const std::vector<Eigen::VectorXd>& observations);

struct GridSpec {
  double lo = -10.0;
  double hi = 10.0;
  int points = 2001;
};

/// Dense-grid forward-backward smoother for 1-D models: exact sum-product on
/// a trapezoid discretization, in log space. Returns (mean, variance) per
/// step. Throws GridTooSmallError when smoothed mass leaks to a grid edge.
std::vector<std::pair<double, double>> grid_smoother_1d(
    const StateSpaceModel& model, const std::vector<Eigen::VectorXd>& observations,
    const GridSpec& grid, ExecPolicy exec = ExecPolicy::parallel);

}  // namespace pvs
