#pragma once

#include <vector>

#include "pvs/fpvs.hpp"
#include "pvs/rpvs.hpp"

namespace pvs {

/// Iterate of the hybrid smoother: fused marginals plus the forward and
/// reverse factorizations produced by the two passes.
struct HybridState {
  std::vector<Gaussian> marginals;
  ForwardPosterior fwd;
  ReversePosterior rev;

  int horizon() const { return fwd.horizon(); }
};

/// Fuse the forward pass's conditional log-normalizers with the reverse
/// pass's potentials by completing squares. Interior steps 0 < k < T read
/// fwd_normalizers[k] (S, s) and rev_potentials[k] (R, r); the endpoints come
/// from the two boundary updates. With beta = 0 the previous marginals are
/// not touched.
std::vector<Gaussian> hybrid_marginals(double beta, const std::vector<Gaussian>& prev_marginals,
                                       const std::vector<Quadratic>& fwd_normalizers,
                                       const std::vector<Quadratic>& rev_potentials,
                                       const Gaussian& fwd_boundary, const Gaussian& rev_boundary);

HybridState hybrid_prior_predictive(const StateSpaceModel& model, int horizon,
                                    const QuadratureSpec& spec = {});

struct HpvsResult {
  std::vector<Gaussian> marginals;
  HybridState state;
  std::vector<IterationRecord> trace;
  std::vector<std::vector<Gaussian>> marginal_history;
  /// max mean gap between forward-path and reverse-path marginals, one entry
  /// per iteration; tracks how far the two stored factorizations drift apart.
  std::vector<double> path_discrepancy;
  bool converged = false;
  int iterations = 0;
};

/// Hybrid loop: one shared expansion per iteration, damping chosen by the
/// forward strategy, then the two passes (independent; run in either order or
/// concurrently with identical results) fused into marginals.
HpvsResult run_hpvs(const StateSpaceModel& model, const std::vector<Eigen::VectorXd>& observations,
                    ExpansionMethod method, const QuadratureSpec& spec, const DampingConfig& cfg,
                    HybridState init, int max_iters, double conv_tol,
                    ExecPolicy exec = ExecPolicy::parallel);

}  // namespace pvs
