#include "pvs/experiment.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>

#include "pvs/baseline.hpp"
#include "pvs/errors.hpp"
#include "pvs/fpvs.hpp"
#include "pvs/hpvs.hpp"
#include "pvs/models.hpp"
#include "pvs/rpvs.hpp"

namespace pvs {

namespace {

using ordered_json = nlohmann::ordered_json;

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void check_keys(const ordered_json& obj, std::initializer_list<const char*> allowed,
                const std::string& prefix) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool known = false;
    for (const char* key : allowed)
      if (it.key() == key) known = true;
    if (!known) throw ValidationError(prefix.empty() ? it.key() : prefix + "." + it.key());
  }
}

double as_number(const ordered_json& v, const std::string& path) {
  if (!v.is_number()) throw ValidationError(path);
  return v.get<double>();
}

int as_int(const ordered_json& v, const std::string& path) {
  if (!v.is_number_integer()) throw ValidationError(path);
  return v.get<int>();
}

Eigen::VectorXd as_vector(const ordered_json& v, const std::string& path) {
  if (!v.is_array() || v.empty()) throw ValidationError(path);
  Eigen::VectorXd out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out(i) = as_number(v[i], path);
  return out;
}

Eigen::MatrixXd as_matrix(const ordered_json& v, const std::string& path) {
  if (!v.is_array() || v.empty() || !v[0].is_array()) throw ValidationError(path);
  const std::size_t rows = v.size(), cols = v[0].size();
  Eigen::MatrixXd out(rows, cols);
  for (std::size_t i = 0; i < rows; ++i) {
    if (!v[i].is_array() || v[i].size() != cols) throw ValidationError(path);
    for (std::size_t j = 0; j < cols; ++j) out(i, j) = as_number(v[i][j], path);
  }
  return out;
}

ordered_json vector_json(const Eigen::VectorXd& v) {
  ordered_json out = ordered_json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

ordered_json matrix_json(const Eigen::MatrixXd& m) {
  ordered_json out = ordered_json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    ordered_json row = ordered_json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    out.push_back(row);
  }
  return out;
}

LinearGaussianParams default_linear_params() {
  LinearGaussianParams p;
  p.A = Eigen::MatrixXd::Ones(1, 1);
  p.b = Eigen::VectorXd::Zero(1);
  p.Q = Eigen::MatrixXd::Ones(1, 1);
  p.H = Eigen::MatrixXd::Ones(1, 1);
  p.e = Eigen::VectorXd::Zero(1);
  p.R = Eigen::MatrixXd::Ones(1, 1);
  p.mu0 = Eigen::VectorXd::Zero(1);
  p.Lam0 = Eigen::MatrixXd::Ones(1, 1);
  return p;
}

struct BuiltModel {
  std::unique_ptr<StateSpaceModel> model;
  const LinearGaussianModel* linear = nullptr;
};

BuiltModel build_model(const RunConfig& cfg) {
  BuiltModel out;
  if (const auto* lg = std::get_if<LinearGaussianParams>(&cfg.params)) {
    auto m = std::make_unique<LinearGaussianModel>(lg->A, lg->b, lg->Q, lg->H, lg->e, lg->R,
                                                   lg->mu0, lg->Lam0);
    out.linear = m.get();
    out.model = std::move(m);
  } else if (const auto* sv = std::get_if<StochasticVolatilityParams>(&cfg.params)) {
    out.model = std::make_unique<StochasticVolatilityModel>(sv->a, sv->q, sv->scale);
  } else {
    const auto& pd = std::get<PendulumParams>(cfg.params);
    out.model = std::make_unique<PendulumModel>(pd.dt, pd.g_over_l, pd.q_c, pd.r);
  }
  return out;
}

}  // namespace

RunConfig parse_config_text(const std::string& text) {
  ordered_json doc;
  try {
    doc = ordered_json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("config parse failure: ") + e.what());
  }
  if (!doc.is_object()) throw ParseError("config root must be a JSON object");
  check_keys(doc,
             {"model", "model_params", "horizon", "seed", "smoother", "expansion", "quadrature",
              "damping", "max_iters", "conv_tol", "output_dir"},
             "");
  for (const char* required : {"model", "horizon", "smoother"})
    if (!doc.contains(required)) throw ValidationError(required);

  RunConfig cfg;
  if (!doc["model"].is_string()) throw ValidationError("model");
  cfg.model = doc["model"].get<std::string>();

  cfg.horizon = as_int(doc["horizon"], "horizon");
  if (cfg.horizon < 1) throw ValidationError("horizon");
  if (doc.contains("seed")) {
    if (!doc["seed"].is_number_integer() || doc["seed"].get<long long>() < 0)
      throw ValidationError("seed");
    cfg.seed = doc["seed"].get<std::uint64_t>();
  }

  const std::string smoother = doc["smoother"].get<std::string>();
  if (smoother == "fpvs")
    cfg.smoother = SmootherKind::fpvs;
  else if (smoother == "rpvs")
    cfg.smoother = SmootherKind::rpvs;
  else if (smoother == "hpvs")
    cfg.smoother = SmootherKind::hpvs;
  else if (smoother == "rts")
    cfg.smoother = SmootherKind::rts;
  else
    throw ValidationError("smoother");

  if (doc.contains("expansion")) {
    const std::string expansion = doc["expansion"].get<std::string>();
    if (expansion == "gslr")
      cfg.expansion = ExpansionMethod::gslr;
    else if (expansion == "fourier_hermite")
      cfg.expansion = ExpansionMethod::fourier_hermite;
    else
      throw ValidationError("expansion");
  }

  if (doc.contains("quadrature")) {
    const ordered_json& q = doc["quadrature"];
    if (!q.is_object()) throw ValidationError("quadrature");
    check_keys(q, {"kind", "order"}, "quadrature");
    if (q.contains("kind")) {
      const std::string kind = q["kind"].get<std::string>();
      if (kind == "auto")
        cfg.quadrature.kind = QuadratureSpec::Kind::automatic;
      else if (kind == "gauss_hermite")
        cfg.quadrature.kind = QuadratureSpec::Kind::gauss_hermite;
      else if (kind == "unscented")
        cfg.quadrature.kind = QuadratureSpec::Kind::unscented;
      else
        throw ValidationError("quadrature.kind");
    }
    if (q.contains("order")) {
      cfg.quadrature.order = as_int(q["order"], "quadrature.order");
      if (cfg.quadrature.order < 1) throw ValidationError("quadrature.order");
    }
  }

  // model parameters (defaults per model, overridable field by field)
  ordered_json mp = doc.value("model_params", ordered_json::object());
  if (!mp.is_object()) throw ValidationError("model_params");
  int dim_x = 1;
  if (cfg.model == "linear_gaussian") {
    check_keys(mp, {"A", "b", "Q", "H", "e", "R", "mu0", "Lam0"}, "model_params");
    LinearGaussianParams p = default_linear_params();
    if (mp.contains("A")) p.A = as_matrix(mp["A"], "model_params.A");
    if (mp.contains("b")) p.b = as_vector(mp["b"], "model_params.b");
    if (mp.contains("Q")) p.Q = as_matrix(mp["Q"], "model_params.Q");
    if (mp.contains("H")) p.H = as_matrix(mp["H"], "model_params.H");
    if (mp.contains("e")) p.e = as_vector(mp["e"], "model_params.e");
    if (mp.contains("R")) p.R = as_matrix(mp["R"], "model_params.R");
    if (mp.contains("mu0")) p.mu0 = as_vector(mp["mu0"], "model_params.mu0");
    if (mp.contains("Lam0")) p.Lam0 = as_matrix(mp["Lam0"], "model_params.Lam0");
    dim_x = static_cast<int>(p.mu0.size());
    cfg.params = std::move(p);
  } else if (cfg.model == "stochastic_volatility") {
    check_keys(mp, {"a", "q", "scale"}, "model_params");
    StochasticVolatilityParams p;
    if (mp.contains("a")) p.a = as_number(mp["a"], "model_params.a");
    if (mp.contains("q")) p.q = as_number(mp["q"], "model_params.q");
    if (mp.contains("scale")) p.scale = as_number(mp["scale"], "model_params.scale");
    cfg.params = p;
    dim_x = 1;
  } else if (cfg.model == "pendulum") {
    check_keys(mp, {"dt", "g_over_l", "q_c", "r"}, "model_params");
    PendulumParams p;
    if (mp.contains("dt")) p.dt = as_number(mp["dt"], "model_params.dt");
    if (mp.contains("g_over_l")) p.g_over_l = as_number(mp["g_over_l"], "model_params.g_over_l");
    if (mp.contains("q_c")) p.q_c = as_number(mp["q_c"], "model_params.q_c");
    if (mp.contains("r")) p.r = as_number(mp["r"], "model_params.r");
    cfg.params = p;
    dim_x = 2;
  } else {
    throw ValidationError("model");
  }
  if (cfg.smoother == SmootherKind::rts && cfg.model != "linear_gaussian")
    throw ValidationError("smoother");
  try {
    build_model(cfg);
  } catch (const DomainError&) {
    throw ValidationError("model_params");
  }

  cfg.damping.epsilon = 0.1 * (cfg.horizon + 1) * dim_x;
  if (doc.contains("damping")) {
    const ordered_json& dj = doc["damping"];
    if (!dj.is_object()) throw ValidationError("damping");
    check_keys(dj, {"epsilon", "alpha_min", "alpha_max", "alpha_init", "kl_rel_tol", "max_bisect"},
               "damping");
    if (dj.contains("epsilon")) cfg.damping.epsilon = as_number(dj["epsilon"], "damping.epsilon");
    if (dj.contains("alpha_min"))
      cfg.damping.alpha_min = as_number(dj["alpha_min"], "damping.alpha_min");
    if (dj.contains("alpha_max"))
      cfg.damping.alpha_max = as_number(dj["alpha_max"], "damping.alpha_max");
    if (dj.contains("alpha_init"))
      cfg.damping.alpha_init = as_number(dj["alpha_init"], "damping.alpha_init");
    if (dj.contains("kl_rel_tol"))
      cfg.damping.kl_rel_tol = as_number(dj["kl_rel_tol"], "damping.kl_rel_tol");
    if (dj.contains("max_bisect")) cfg.damping.max_bisect = as_int(dj["max_bisect"], "damping.max_bisect");
  }
  try {
    cfg.damping.validate();
  } catch (const DomainError&) {
    throw ValidationError("damping.epsilon");
  }
  if (!(cfg.damping.epsilon > 0.0)) throw ValidationError("damping.epsilon");

  if (doc.contains("max_iters")) {
    cfg.max_iters = as_int(doc["max_iters"], "max_iters");
    if (cfg.max_iters < 0) throw ValidationError("max_iters");
  }
  if (doc.contains("conv_tol")) {
    cfg.conv_tol = as_number(doc["conv_tol"], "conv_tol");
    if (!(cfg.conv_tol > 0.0)) throw ValidationError("conv_tol");
  }
  if (doc.contains("output_dir")) {
    if (!doc["output_dir"].is_string()) throw ValidationError("output_dir");
    cfg.output_dir = doc["output_dir"].get<std::string>();
  }

  // canonical echo with every default made explicit
  ordered_json echo;
  echo["model"] = cfg.model;
  ordered_json params;
  if (const auto* lg = std::get_if<LinearGaussianParams>(&cfg.params)) {
    params["A"] = matrix_json(lg->A);
    params["b"] = vector_json(lg->b);
    params["Q"] = matrix_json(lg->Q);
    params["H"] = matrix_json(lg->H);
    params["e"] = vector_json(lg->e);
    params["R"] = matrix_json(lg->R);
    params["mu0"] = vector_json(lg->mu0);
    params["Lam0"] = matrix_json(lg->Lam0);
  } else if (const auto* sv = std::get_if<StochasticVolatilityParams>(&cfg.params)) {
    params["a"] = sv->a;
    params["q"] = sv->q;
    params["scale"] = sv->scale;
  } else {
    const auto& pd = std::get<PendulumParams>(cfg.params);
    params["dt"] = pd.dt;
    params["g_over_l"] = pd.g_over_l;
    params["q_c"] = pd.q_c;
    params["r"] = pd.r;
  }
  echo["model_params"] = params;
  echo["horizon"] = cfg.horizon;
  echo["seed"] = cfg.seed;
  echo["smoother"] = smoother;
  echo["expansion"] = cfg.expansion == ExpansionMethod::gslr ? "gslr" : "fourier_hermite";
  echo["quadrature"] = {
      {"kind", cfg.quadrature.kind == QuadratureSpec::Kind::automatic        ? "auto"
               : cfg.quadrature.kind == QuadratureSpec::Kind::gauss_hermite ? "gauss_hermite"
                                                                            : "unscented"},
      {"order", cfg.quadrature.order}};
  echo["damping"] = {{"epsilon", cfg.damping.epsilon},
                     {"alpha_min", cfg.damping.alpha_min},
                     {"alpha_max", cfg.damping.alpha_max},
                     {"alpha_init", cfg.damping.alpha_init},
                     {"kl_rel_tol", cfg.damping.kl_rel_tol},
                     {"max_bisect", cfg.damping.max_bisect}};
  echo["max_iters"] = cfg.max_iters;
  echo["conv_tol"] = cfg.conv_tol;
  echo["output_dir"] = cfg.output_dir;
  cfg.echo_json = echo.dump();
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open config file: " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config_text(buffer.str());
}

namespace {

double rmse_vs(const std::vector<Gaussian>& marginals,
               const std::vector<Eigen::VectorXd>& reference) {
  double acc = 0.0;
  std::size_t count = 0;
  for (std::size_t k = 0; k < marginals.size(); ++k) {
    acc += (marginals[k].mean - reference[k]).squaredNorm();
    count += marginals[k].mean.size();
  }
  return std::sqrt(acc / static_cast<double>(count));
}

void write_marginals_csv(const std::vector<Gaussian>& marginals, const std::string& path) {
  std::ofstream os(path);
  const int d = marginals.empty() ? 0 : marginals[0].dim();
  os << "k";
  for (int i = 0; i < d; ++i) os << ",mean" << i;
  for (int i = 0; i < d; ++i) os << ",var" << i;
  os << "\n";
  for (std::size_t k = 0; k < marginals.size(); ++k) {
    os << k;
    for (int i = 0; i < d; ++i) os << ',' << fmt(marginals[k].mean(i));
    for (int i = 0; i < d; ++i) os << ',' << fmt(marginals[k].cov(i, i));
    os << "\n";
  }
}

void write_trace_jsonl(const std::vector<IterationRecord>& trace, const std::string& path) {
  std::ofstream os(path);
  for (const IterationRecord& rec : trace) {
    ordered_json line;
    line["iter"] = rec.iter;
    line["beta"] = rec.beta;
    line["kl"] = rec.kl;
    line["epsilon"] = rec.epsilon;
    line["log_Z_boundary"] = rec.log_z_boundary;
    line["dual_value"] = rec.dual_value;
    line["max_mean_change"] = rec.max_mean_change;
    line["wall_ms"] = rec.wall_ms;
    os << line.dump() << "\n";
  }
}

}  // namespace

int run_experiment(const RunConfig& cfg) {
  namespace fs = std::filesystem;
  const fs::path out_dir(cfg.output_dir);
  try {
    fs::create_directories(out_dir);
    const BuiltModel built = build_model(cfg);
    const StateSpaceModel& model = *built.model;

    const Trajectory traj = simulate(model, cfg.horizon, cfg.seed);
    {
      std::ofstream os(out_dir / "trajectory.csv");
      write_trajectory_csv(traj, os);
    }

    std::vector<Gaussian> marginals;
    std::vector<IterationRecord> trace;
    bool converged = false;
    int iterations = 0;
    if (cfg.smoother == SmootherKind::rts) {
      marginals = kalman_rts(*built.linear, traj.observations).smoothed;
      converged = true;
      iterations = 1;
    } else if (cfg.smoother == SmootherKind::fpvs) {
      FpvsResult res = run_fpvs(model, traj.observations, cfg.expansion, cfg.quadrature,
                                cfg.damping,
                                prior_predictive_posterior(model, cfg.horizon, cfg.quadrature),
                                cfg.max_iters, cfg.conv_tol);
      marginals = std::move(res.marginals);
      trace = std::move(res.trace);
      converged = res.converged;
      iterations = res.iterations;
    } else if (cfg.smoother == SmootherKind::rpvs) {
      RpvsResult res = run_rpvs(model, traj.observations, cfg.expansion, cfg.quadrature,
                                cfg.damping,
                                reverse_prior_predictive(model, cfg.horizon, cfg.quadrature),
                                cfg.max_iters, cfg.conv_tol);
      marginals = std::move(res.marginals);
      trace = std::move(res.trace);
      converged = res.converged;
      iterations = res.iterations;
    } else {
      HpvsResult res = run_hpvs(model, traj.observations, cfg.expansion, cfg.quadrature,
                                cfg.damping,
                                hybrid_prior_predictive(model, cfg.horizon, cfg.quadrature),
                                cfg.max_iters, cfg.conv_tol);
      marginals = std::move(res.marginals);
      trace = std::move(res.trace);
      converged = res.converged;
      iterations = res.iterations;
    }

    write_marginals_csv(marginals, (out_dir / "marginals.csv").string());
    write_trace_jsonl(trace, (out_dir / "trace.jsonl").string());

    ordered_json summary;
    summary["converged"] = converged;
    summary["iters"] = iterations;
    summary["final_rmse_vs_truth"] = rmse_vs(marginals, traj.states);
    if (built.linear) {
      const RtsResult rts = kalman_rts(*built.linear, traj.observations);
      std::vector<Eigen::VectorXd> means;
      means.reserve(rts.smoothed.size());
      for (const Gaussian& g : rts.smoothed) means.push_back(g.mean);
      summary["final_rmse_vs_rts"] = rmse_vs(marginals, means);
    }
    summary["config"] = ordered_json::parse(cfg.echo_json);
    std::ofstream os(out_dir / "summary.json");
    os << summary.dump(2) << "\n";

    return converged ? 0 : 2;
  } catch (const std::exception& e) {
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    std::ofstream os(out_dir / "trace.jsonl", std::ios::app);
    ordered_json line;
    line["error"] = e.what();
    os << line.dump() << "\n";
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}

namespace {

struct LoadedRun {
  std::string path;
  ordered_json summary;
  Eigen::MatrixXd means;  // (T+1) x d
  double wall_ms_total = 0.0;
  std::vector<double> betas;
};

Eigen::MatrixXd read_marginal_means(const std::filesystem::path& csv_path) {
  std::ifstream in(csv_path);
  if (!in) throw ValidationError(csv_path.string());
  std::string header;
  std::getline(in, header);
  int d = 0;
  {
    std::stringstream hs(header);
    std::string col;
    while (std::getline(hs, col, ','))
      if (col.rfind("mean", 0) == 0) ++d;
  }
  if (d == 0) throw ValidationError(csv_path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ls(line);
    std::string cell;
    std::vector<double> row;
    while (std::getline(ls, cell, ',')) row.push_back(std::strtod(cell.c_str(), nullptr));
    rows.push_back(std::move(row));
  }
  Eigen::MatrixXd means(rows.size(), d);
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (int i = 0; i < d; ++i) means(r, i) = rows[r][1 + i];
  return means;
}

}  // namespace

std::string compare_runs(const std::vector<std::string>& summary_paths) {
  namespace fs = std::filesystem;
  if (summary_paths.size() < 2) throw ValidationError("paths");

  std::vector<LoadedRun> runs;
  for (const std::string& path : summary_paths) {
    LoadedRun run;
    run.path = path;
    std::ifstream in(path);
    if (!in) throw ValidationError(path);
    try {
      run.summary = ordered_json::parse(in);
    } catch (const nlohmann::json::parse_error&) {
      throw ValidationError(path);
    }
    const fs::path dir = fs::path(path).parent_path();
    run.means = read_marginal_means(dir / "marginals.csv");
    std::ifstream trace(dir / "trace.jsonl");
    std::string line;
    while (std::getline(trace, line)) {
      if (line.empty()) continue;
      const ordered_json rec = ordered_json::parse(line, nullptr, false);
      if (rec.is_discarded() || !rec.contains("beta")) continue;
      run.betas.push_back(rec["beta"].get<double>());
      run.wall_ms_total += rec.value("wall_ms", 0.0);
    }
    runs.push_back(std::move(run));
  }

  const Eigen::Index rows0 = runs.front().means.rows();
  for (const LoadedRun& run : runs)
    if (run.means.rows() != rows0) throw ValidationError("horizon");

  std::ostringstream os;
  os << "section,run_a,run_b,metric,value\n";
  auto text_row = [&](const std::string& run, const char* metric, const std::string& value) {
    os << "per_run," << run << ",," << metric << ',' << value << "\n";
  };
  for (const LoadedRun& run : runs) {
    const ordered_json& cfg = run.summary.at("config");
    text_row(run.path, "model", cfg.at("model").get<std::string>());
    text_row(run.path, "smoother", cfg.at("smoother").get<std::string>());
    text_row(run.path, "horizon", std::to_string(cfg.at("horizon").get<int>()));
    text_row(run.path, "converged", run.summary.at("converged").get<bool>() ? "1" : "0");
    text_row(run.path, "iterations", std::to_string(run.summary.at("iters").get<int>()));
    text_row(run.path, "final_rmse_vs_truth",
             fmt(run.summary.at("final_rmse_vs_truth").get<double>()));
    if (run.summary.contains("final_rmse_vs_rts"))
      text_row(run.path, "final_rmse_vs_rts",
               fmt(run.summary.at("final_rmse_vs_rts").get<double>()));
    text_row(run.path, "wall_ms_total", fmt(run.wall_ms_total));
    if (!run.betas.empty()) {
      double mean = 0.0, lo = runs.front().betas.empty() ? 0.0 : run.betas.front(), hi = lo;
      lo = hi = run.betas.front();
      for (double b : run.betas) {
        mean += b;
        lo = std::min(lo, b);
        hi = std::max(hi, b);
      }
      mean /= static_cast<double>(run.betas.size());
      text_row(run.path, "beta_mean", fmt(mean));
      text_row(run.path, "beta_min", fmt(lo));
      text_row(run.path, "beta_max", fmt(hi));
      text_row(run.path, "beta_final", fmt(run.betas.back()));
    }
  }
  for (std::size_t a = 0; a < runs.size(); ++a) {
    for (std::size_t b = a + 1; b < runs.size(); ++b) {
      if (runs[a].means.cols() != runs[b].means.cols()) throw ValidationError("horizon");
      const double rmse = std::sqrt((runs[a].means - runs[b].means).squaredNorm() /
                                    static_cast<double>(runs[a].means.size()));
      os << "pairwise," << runs[a].path << ',' << runs[b].path << ",marginal_mean_rmse,"
         << fmt(rmse) << "\n";
    }
  }
  return os.str();
}

}  // namespace pvs
