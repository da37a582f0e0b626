#pragma once

#include <array>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "dpgt/mesh.hpp"
#include "dpgt/polynomial.hpp"

namespace dpgt {

// polynomial degrees, subgrid depth and adaptive-loop knobs
struct DiscretizationConfig {
  int m_u = 1;
  int m_w = 1;
  int m_v = 2;
  int m_b = 0;
  int m_c = 0;
  int m_f = 1;
  int subgrid_depth = 1;
  double theta = 0.5;   // bulk fraction, (0,1]
  double beta = 0.2;    // u-correction threshold, (0, 1/4)
  int refine_depth = 1;
  int downwind_depth = 1;  // refinement depth applied to downwind cells
  double cg_tol = 1e-11;
  int dense_limit = 2000;  // dense solve below this size

  // throws on violated degree/threshold constraints; the marking regime
  // additionally needs m_w <= m_u + 1
  void validate(bool marking_regime = false) const;

  // quadrature order that keeps every assembled integral exact
  int quad_order() const;
};

// Convection/reaction/source as exact piecewise polynomials over the root
// partition, plus optional exact-solution hooks for convergence studies.
// Inflow data is homogeneous.
class TransportProblem {
 public:
  enum class SourceKind { PerRootPoly, Piecewise1D, Pointwise };

  int dim = 1;
  SimplicialMesh root;

  bool b_constant = true;
  Vec2 b0{1.0, 0.0};
  std::vector<std::array<Poly, 2>> b_cells;  // per root cell, physical coords

  bool c_constant_per_cell = true;
  std::vector<double> c_values;  // per root cell
  std::vector<Poly> c_cells;

  SourceKind f_kind = SourceKind::PerRootPoly;
  std::vector<Poly> f_cells;  // per root cell
  struct Piece {
    double lo, hi;
    Poly p;
  };
  std::vector<Piece> f_pieces;  // 1D, ordered, covering the domain
  std::function<double(const Vec2&)> f_fn;

  std::function<double(const Vec2&)> u_exact;         // optional
  std::function<double(const Vec2&)> b_grad_u_exact;  // b . grad(u_exact)

  bool has_exact() const { return static_cast<bool>(u_exact); }

  static TransportProblem constant_coefficients(SimplicialMesh root_mesh,
                                                const Vec2& b, double c,
                                                const Poly& f);

  Vec2 b_at(const Vec2& p) const;
  double c_at(const Vec2& p) const;
  double f_at(const Vec2& p) const;
  double b_scale() const;    // max |b| over samples
  double b_min_abs() const;  // min |b| over samples (must stay > 0)

  // root ancestor of a cell of any mesh refined from `root`
  int root_cell_of(const SimplicialMesh& mesh, int cell) const;
  const std::array<Poly, 2>& b_poly(int root_cell) const;
  Poly c_poly(int root_cell) const;

  // exact integral of f * v over a cell (quadrature fallback only for
  // pointwise sources)
  double integrate_f_against(const SimplicialMesh& mesh, int cell,
                             const Poly& v, int quad_order) const;
  double f_l2_sq(const SimplicialMesh& mesh, int quad_order) const;

  std::function<Vec2(const Vec2&)> convection_fn() const;
};

// per-coarse-cell polynomial surrogates and per-fine-cell frozen convection
struct PerturbedData {
  std::vector<std::array<Poly, 2>> btilde;  // per coarse leaf index
  std::vector<Poly> ctilde;
  std::vector<Poly> ftilde;
  std::vector<Vec2> b_avg;     // per fine leaf index
  std::vector<double> div_avg; // average of div(btilde) per fine leaf
};

PerturbedData project_data(const TransportProblem& problem,
                           const SubgridPair& pair,
                           const DiscretizationConfig& cfg);

double data_oscillation(const TransportProblem& problem,
                        const PerturbedData& data, const SubgridPair& pair,
                        const DiscretizationConfig& cfg);

// L2-orthonormal monomial-based basis of P_m on a cell, physical coordinates
std::vector<Poly> orthonormal_cell_basis(const SimplicialMesh& mesh, int cell,
                                         int degree);
int poly_space_dim(int dim, int degree);

}  // namespace dpgt
