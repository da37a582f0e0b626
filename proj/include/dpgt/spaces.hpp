#pragma once

#include <Eigen/Dense>
#include <vector>

#include "dpgt/mesh.hpp"
#include "dpgt/polynomial.hpp"
#include "dpgt/problem.hpp"

namespace dpgt {

// Product trial space on the coarse partition: discontinuous P_{m_u}
// (per-cell L2-orthonormal) times continuous P_{m_w} Lagrange with the
// inflow-boundary nodes eliminated.
class TrialSpace {
 public:
  const SimplicialMesh* mesh = nullptr;
  int m_u = 1, m_w = 1;

  std::vector<std::vector<Poly>> u_basis;  // per coarse leaf
  int u_loc_dim = 0;
  int dim_u = 0;

  std::vector<Vec2> nodes;                   // global Lagrange nodes
  std::vector<int> node_dof;                 // -1 if constrained to zero
  std::vector<std::vector<int>> cell_nodes;  // per leaf: local -> global node
  std::vector<std::vector<Poly>> w_shape;    // per leaf: local shapes
  int dim_w = 0;

  int dim() const { return dim_u + dim_w; }
  int u_offset(int leaf_idx) const { return leaf_idx * u_loc_dim; }
  // global coefficient index of a free node, -1 if constrained
  int w_index(int node) const {
    return node_dof[node] < 0 ? -1 : dim_u + node_dof[node];
  }
};

TrialSpace build_trial_space(const SimplicialMesh& mesh,
                             const DiscretizationConfig& cfg,
                             const FaceClassification& faces,
                             bool apply_inflow_constraints = true);

// Broken per-cell P_{m_v} space on the fine partition, L2-orthonormal.
class TestSpace {
 public:
  const SimplicialMesh* mesh = nullptr;
  int m_v = 2;
  std::vector<std::vector<Poly>> basis;  // per fine leaf
  int loc_dim = 0;
  int dim() const { return loc_dim * static_cast<int>(basis.size()); }
  int offset(int leaf_idx) const { return leaf_idx * loc_dim; }
};

TestSpace build_test_space(const SimplicialMesh& fine,
                           const DiscretizationConfig& cfg);

struct TrialFunction {
  const TrialSpace* space = nullptr;
  Eigen::VectorXd coeffs;

  TrialFunction() = default;
  explicit TrialFunction(const TrialSpace& s)
      : space(&s), coeffs(Eigen::VectorXd::Zero(s.dim())) {}

  // per-coarse-cell polynomials in physical coordinates
  Poly u_poly(int leaf_idx) const;
  Poly w_poly(int leaf_idx) const;

  double eval_u(int leaf_idx, const Vec2& p) const;
  double eval_w(int leaf_idx, const Vec2& p) const;
  Vec2 grad_w(int leaf_idx, const Vec2& p) const;
};

// re-express a trial function on a refinement of its mesh (exact: the trial
// spaces are nested under refinement)
TrialFunction reexpand(const TrialFunction& fn, const TrialSpace& finer);

}  // namespace dpgt
