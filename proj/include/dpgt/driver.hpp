#pragma once

#include <cmath>
#include <iosfwd>
#include <string>
#include <vector>

#include "dpgt/config.hpp"
#include "dpgt/estimator.hpp"

namespace dpgt {

struct ConvergenceRecord {
  int iter = 0;
  int ndof = 0;
  double eta = 0.0;
  double rdelta = 0.0;
  double osc = 0.0;
  double err_u = std::nan("");  // NaN when no exact solution
  double err_w = std::nan("");
  int marked = 0;
  double nu_obs = std::nan("");  // eta ratio to the previous iteration
  double gamma_infsup = std::nan("");
};

struct AdaptiveResult {
  std::vector<ConvergenceRecord> records;
  SimplicialMesh final_mesh;
};

// solve -> estimate -> mark -> downwind-close -> refine loop (also runs the
// uniform-refinement study when cfg.mode == "uniform"); writes convergence,
// indicator and mesh files into cfg.output_dir
AdaptiveResult run_adaptive(const ExperimentConfig& cfg,
                            bool write_files = true);

std::string convergence_csv(const std::vector<ConvergenceRecord>& records);

// seeded invariant suite; one line per check, returns the failure count
int run_verify(const ExperimentConfig& cfg, uint64_t seed, std::ostream& out);

struct ConjectureRow {
  int depth = 0;
  double xi = 0.0;
  double w_over_F = 0.0;
  int free_dofs = 0;
};

// sweeps the refinement depth and probes the constrained correction problem
// on source fields produced by an adaptive run
std::vector<ConjectureRow> run_conjecture(const ExperimentConfig& cfg,
                                          std::ostream& out);

}  // namespace dpgt
