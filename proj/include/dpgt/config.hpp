#pragma once

#include <cstdint>
#include <string>

#include "dpgt/problem.hpp"

namespace dpgt {

// experiment description parsed from the "[section]\nkey = value" config
// format; unknown keys are rejected at load
struct ExperimentConfig {
  // [problem]
  int dim = 1;
  double ax = 0.0, bx = 1.0, ay = 0.0, by = 1.0;
  int resolution = 4;
  Vec2 b{1.0, 0.0};
  double c = 0.0;
  std::string f_spec = "const 1";
  std::string exact = "none";

  // [discretization]
  DiscretizationConfig disc;

  // [run]
  std::string mode = "adaptive";  // adaptive | uniform | verify | conjecture
  int max_iterations = 25;
  double target_eta_rel = 1e-8;
  int max_dofs = 200000;
  std::string marker = "eta";  // eta | rdelta
  bool compare_ls = false;
  bool compute_infsup = false;
  int conjecture_max_depth = 5;
  int conjecture_setup_iterations = 3;
  int uniform_steps = 4;

  // [output]
  std::string output_dir = "out";
  uint64_t seed = 1234;

  static ExperimentConfig from_file(const std::string& path);
  static ExperimentConfig from_string(const std::string& text);

  // re-validates every derived constraint; throws std::invalid_argument
  void validate() const;

  TransportProblem make_problem() const;
};

}  // namespace dpgt
