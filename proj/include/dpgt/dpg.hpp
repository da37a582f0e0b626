#pragma once

#include <Eigen/Dense>
#include <vector>

#include "dpgt/linalg.hpp"
#include "dpgt/mesh.hpp"
#include "dpgt/problem.hpp"
#include "dpgt/spaces.hpp"

namespace dpgt {

// residual lifted to the broken test-search space
struct LiftedResidual {
  enum class Kind { Projected, ExactModified, Approximate };
  Kind kind = Kind::Projected;
  std::vector<Eigen::VectorXd> cell_coeffs;  // per fine leaf, test basis
  std::vector<double> cell_norm_sq;          // squared H(b;K) norms
  std::vector<double> coarse_norm_sq;        // aggregated per coarse leaf
  double total_norm_sq = 0.0;
};

// B, Gram, load and the normal equations of the minimal-residual problem
struct DpgSystem {
  const TransportProblem* problem = nullptr;
  const PerturbedData* data = nullptr;
  const TrialSpace* trial = nullptr;
  const TestSpace* test = nullptr;
  const SubgridPair* pair = nullptr;
  DiscretizationConfig cfg;
  FaceClassification fine_faces;

  SpMat B;              // N_V x N_U
  BlockDiagonal G;      // test-space Gram, one block per fine cell
  Eigen::VectorXd F;    // load
  SpMat S;              // B^T G^{-1} B
  Eigen::VectorXd rhs;  // B^T G^{-1} F
};

DpgSystem assemble_system(const TransportProblem& problem,
                          const PerturbedData& data, const TrialSpace& trial,
                          const TestSpace& test, const SubgridPair& pair,
                          const DiscretizationConfig& cfg);

TrialFunction solve_pg(const DpgSystem& sys);

LiftedResidual project_residual(const DpgSystem& sys,
                                const Eigen::VectorXd& x);
inline LiftedResidual project_residual(const DpgSystem& sys,
                                       const TrialFunction& fn) {
  return project_residual(sys, fn.coeffs);
}

// per-cell Gram solves of B x; coefficients in the test basis
Eigen::VectorXd trial_to_test(const DpgSystem& sys, const Eigen::VectorXd& x);
double test_norm_sq(const DpgSystem& sys, const Eigen::VectorXd& v);

// Gram of  |(u,w)|^2 = ||u||_{L2}^2 + ||w||_{H(b)}^2  in the trial basis
SpMat trial_norm_gram(const DpgSystem& sys);
double trial_norm_sq(const DpgSystem& sys, const Eigen::VectorXd& x);

struct InfsupEstimate {
  double gamma = 0.0;
  int iterations = 0;
  bool converged = false;
};
// sqrt of the smallest eigenvalue of S x = lambda M x by inverse power
// iteration (M = trial-norm Gram)
InfsupEstimate estimate_discrete_infsup(const DpgSystem& sys,
                                        unsigned seed = 7u);

// independent quadrature evaluation of the broken form against one test
// polynomial on one fine cell (test oracle; bypasses the assembled B)
double broken_form_cell(const DpgSystem& sys, const TrialFunction& fn,
                        int fine_leaf, const Poly& v);

// error of a trial pair against a known exact solution, in the trial metric
struct ExactError {
  double u_l2 = 0.0;       // ||u_ex - u||_{L2}
  double w_hb = 0.0;       // ||u_ex - w||_{H(b)}
  double combined_sq() const { return u_l2 * u_l2 + w_hb * w_hb; }
};
ExactError exact_error(const DpgSystem& sys, const TrialFunction& fn);

}  // namespace dpgt
