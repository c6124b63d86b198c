#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "pvs/damping.hpp"
#include "pvs/expansions.hpp"
#include "pvs/quadrature.hpp"

namespace pvs {

struct LinearGaussianParams {
  Eigen::MatrixXd A, Q, H, R, Lam0;
  Eigen::VectorXd b, e, mu0;
};

struct StochasticVolatilityParams {
  double a = 0.97;
  double q = 0.15;
  double scale = 0.65;
};

struct PendulumParams {
  double dt = 0.01;
  double g_over_l = 9.81;
  double q_c = 0.01;
  double r = 0.1;
};

enum class SmootherKind { fpvs, rpvs, hpvs, rts };

/// Fully validated experiment description with all defaults applied.
/// `echo_json` is the canonical serialized form embedded into summary.json.
struct RunConfig {
  std::string model;
  std::variant<LinearGaussianParams, StochasticVolatilityParams, PendulumParams> params;
  int horizon = 1;
  std::uint64_t seed = 0;
  SmootherKind smoother = SmootherKind::fpvs;
  ExpansionMethod expansion = ExpansionMethod::gslr;
  QuadratureSpec quadrature{};
  DampingConfig damping{};
  int max_iters = 50;
  double conv_tol = 1e-6;
  std::string output_dir = "out";
  std::string echo_json;
};

/// Parse and validate a config file. Unknown keys and out-of-range values
/// raise ValidationError naming the field; malformed JSON raises ParseError.
RunConfig load_config(const std::string& path);

/// Same validation applied to an in-memory JSON document.
RunConfig parse_config_text(const std::string& text);

/// Simulate, smooth, and write trajectory.csv, marginals.csv, trace.jsonl and
/// summary.json under the config's output directory.
/// Returns 0 on convergence, 2 when max_iters was hit, 1 on error.
int run_experiment(const RunConfig& cfg);

/// Cross-run comparison table (long-format CSV) from two or more summary.json
/// paths; sibling marginals.csv / trace.jsonl files supply the per-step and
/// per-iteration data.
std::string compare_runs(const std::vector<std::string>& summary_paths);

}  // namespace pvs
