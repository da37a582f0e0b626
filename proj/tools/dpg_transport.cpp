// Adaptive DPG solver for the steady linear transport equation: experiment
// runner, invariant verifier and refinement-depth probe.

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "dpgt/driver.hpp"

namespace {

int run_mode(const std::string& config_path, const std::string& mode_override,
             long long seed_override) {
  dpgt::ExperimentConfig cfg = dpgt::ExperimentConfig::from_file(config_path);
  if (!mode_override.empty()) cfg.mode = mode_override;
  if (seed_override >= 0) cfg.seed = static_cast<uint64_t>(seed_override);
  cfg.validate();
  namespace fs = std::filesystem;

  if (cfg.mode == "verify") {
    fs::create_directories(cfg.output_dir);
    std::ostringstream report;
    const int failures = dpgt::run_verify(cfg, cfg.seed, report);
    std::ofstream f(fs::path(cfg.output_dir) / "verify_report.txt");
    f << report.str();
    std::cout << report.str();
    return failures == 0 ? 0 : 3;
  }
  if (cfg.mode == "conjecture") {
    fs::create_directories(cfg.output_dir);
    std::ostringstream table;
    dpgt::run_conjecture(cfg, table);
    std::ofstream f(fs::path(cfg.output_dir) / "conjecture.csv");
    f << table.str();
    std::cout << table.str();
    return 0;
  }
  const dpgt::AdaptiveResult result = dpgt::run_adaptive(cfg, true);
  std::cout << dpgt::convergence_csv(result.records);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"adaptive DPG transport solver"};
  app.require_subcommand(1);

  std::string config_path;
  long long seed_override = -1;

  auto* run = app.add_subcommand("run", "adaptive or uniform experiment");
  run->add_option("--config", config_path, "config file")->required();

  auto* verify = app.add_subcommand("verify", "run the invariant suite");
  verify->add_option("--config", config_path, "config file")->required();
  verify->add_option("--seed", seed_override, "override the suite seed");

  auto* conj = app.add_subcommand("conjecture",
                                  "refinement-depth probe table");
  conj->add_option("--config", config_path, "config file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand(run)) return run_mode(config_path, "", -1);
    if (app.got_subcommand(verify))
      return run_mode(config_path, "verify", seed_override);
    return run_mode(config_path, "conjecture", -1);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "solver failure: " << e.what() << "\n";
    return 2;
  }
}
