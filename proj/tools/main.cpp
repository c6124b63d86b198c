#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "pvs/errors.hpp"
#include "pvs/experiment.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Proximal variational smoother experiment runner"};
  app.require_subcommand(1);
  bool quiet = false;
  app.add_flag("--quiet", quiet, "suppress stdout reporting");

  std::string config_path;
  std::string output_dir;
  long long seed_override = -1;
  CLI::App* run = app.add_subcommand("run", "run one experiment from a JSON config");
  run->add_option("config", config_path, "config JSON path")->required();
  run->add_option("--output-dir", output_dir, "override the config's output directory");
  run->add_option("--seed", seed_override, "override the config's seed");

  std::vector<std::string> summaries;
  std::string compare_out;
  CLI::App* compare = app.add_subcommand("compare", "tabulate two or more finished runs");
  compare->add_option("summaries", summaries, "summary.json paths")->required();
  compare->add_option("--output-dir", compare_out, "directory for compare.csv (default .)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      pvs::RunConfig cfg = pvs::load_config(config_path);
      if (!output_dir.empty()) cfg.output_dir = output_dir;
      if (seed_override >= 0) cfg.seed = static_cast<std::uint64_t>(seed_override);
      const int status = pvs::run_experiment(cfg);
      if (!quiet) {
        std::printf("status %d, outputs in %s\n", status, cfg.output_dir.c_str());
      }
      return status;
    }
    const std::string csv = pvs::compare_runs(summaries);
    const std::string dir = compare_out.empty() ? std::string(".") : compare_out;
    std::ofstream os(dir + "/compare.csv");
    os << csv;
    if (!quiet) std::cout << csv;
    return 0;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
