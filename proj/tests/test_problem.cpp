#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "dpgt/problem.hpp"
#include "dpgt/quadrature.hpp"

using namespace dpgt;

namespace {

DiscretizationConfig default_cfg() {
  DiscretizationConfig cfg;
  cfg.m_u = 1;
  cfg.m_w = 1;
  cfg.m_v = 2;
  cfg.m_f = 1;
  return cfg;
}

}  // namespace

TEST_CASE("config degree constraints") {
  DiscretizationConfig cfg = default_cfg();
  CHECK_NOTHROW(cfg.validate());
  cfg.m_v = 1;  // violates m_v >= max(m_u, m_w) + 1
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = default_cfg();
  cfg.m_w = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = default_cfg();
  cfg.beta = 0.3;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = default_cfg();
  cfg.m_w = 3;  // marking regime needs m_w <= m_u + 1
  cfg.m_v = 4;
  CHECK_NOTHROW(cfg.validate(false));
  CHECK_THROWS_AS(cfg.validate(true), std::invalid_argument);
}

TEST_CASE("polynomial data projects to itself") {
  const SimplicialMesh root = build_root_mesh_interval(0, 1, 2);
  const TransportProblem pr = TransportProblem::constant_coefficients(
      root, {1.0, 0.0}, 0.5, poly_1d({1.0, 2.0}));
  const SubgridPair pair = make_subgrid(pr.root, 1);
  const PerturbedData data = project_data(pr, pair, default_cfg());
  for (int ci = 0; ci < pair.coarse.n_leaves(); ++ci) {
    const Vec2 p = pair.coarse.cell_centroid(pair.coarse.leaves[ci]);
    CHECK(data.ftilde[ci].at(p) == doctest::Approx(1.0 + 2.0 * p.x));
    CHECK(data.btilde[ci][0].at(p) == doctest::Approx(1.0));
    CHECK(data.ctilde[ci].at(p) == doctest::Approx(0.5));
  }
  for (int fi = 0; fi < pair.fine.n_leaves(); ++fi) {
    CHECK(data.b_avg[fi].x == doctest::Approx(1.0));
    CHECK(data.div_avg[fi] == doctest::Approx(0.0));
  }
  CHECK(data_oscillation(pr, data, pair, default_cfg()) ==
        doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("variable 1D convection: averages match the midpoint rule") {
  const double h = 0.25;
  const SimplicialMesh root = build_root_mesh_interval(0, h, 1);
  TransportProblem pr = TransportProblem::constant_coefficients(
      root, {1.0, 0.0}, 0.0, Poly::constant(1, 1.0));
  pr.b_constant = false;
  pr.b_cells[0][0] = Poly::var(1, 0) + Poly::constant(1, 1.0);  // 1 + x
  DiscretizationConfig cfg = default_cfg();
  cfg.m_b = 1;
  cfg.m_v = 3;
  const SubgridPair pair = make_subgrid(pr.root, 0);
  const PerturbedData data = project_data(pr, pair, cfg);
  CHECK(data.b_avg[0].x == doctest::Approx(1.0 + h / 2));  // cell average
  CHECK(data.div_avg[0] == doctest::Approx(1.0));
  // independent higher-order quadrature agrees to 1e-13
  const QuadRule q = interval_rule(0, h, 30);
  const double avg = q.integrate(data.btilde[0][0]) / h;
  CHECK(std::abs(avg - data.b_avg[0].x) <= 1e-13 * (1.0 + avg));
}

TEST_CASE("oscillation of a quadratic source under linear projection") {
  // f = x^2 on (0,1), m_f = 1: the projection error is h^2/sqrt(180)
  const SimplicialMesh root = build_root_mesh_interval(0, 1, 1);
  const TransportProblem pr = TransportProblem::constant_coefficients(
      root, {1.0, 0.0}, 0.0, poly_1d({0.0, 0.0, 1.0}));
  DiscretizationConfig cfg = default_cfg();
  const SubgridPair pair = make_subgrid(pr.root, 0);
  const PerturbedData data = project_data(pr, pair, cfg);
  const double osc = data_oscillation(pr, data, pair, cfg);
  CHECK(osc == doctest::Approx(1.0 / std::sqrt(180.0)).epsilon(1e-10));
}

TEST_CASE("projection orthogonality for a non-aligned piecewise source") {
  const SimplicialMesh root = build_root_mesh_interval(0, 1, 2);
  TransportProblem pr = TransportProblem::constant_coefficients(
      root, {1.0, 0.0}, 0.0, Poly::constant(1, 0.0));
  pr.f_kind = TransportProblem::SourceKind::Piecewise1D;
  pr.f_pieces = {{0.0, 0.3, poly_1d({1.0, 1.0})}, {0.3, 1.0, poly_1d({0.0})}};
  DiscretizationConfig cfg = default_cfg();
  const SubgridPair pair = make_subgrid(pr.root, 1);
  const PerturbedData data = project_data(pr, pair, cfg);
  for (int ci = 0; ci < pair.coarse.n_leaves(); ++ci) {
    const int cell = pair.coarse.leaves[ci];
    const auto basis = orthonormal_cell_basis(pair.coarse, cell, cfg.m_f);
    for (const auto& phi : basis) {
      const double f_phi =
          pr.integrate_f_against(pair.coarse, cell, phi, cfg.quad_order());
      const QuadRule q =
          cell_rule(1, pair.coarse.cell_vertices(cell), cfg.quad_order());
      const double t_phi = q.integrate(data.ftilde[ci] * phi);
      CHECK(std::abs(f_phi - t_phi) <= 1e-12);
    }
  }
}

TEST_CASE("oscillation is non-increasing under refinement") {
  const SimplicialMesh root = build_root_mesh_interval(0, 1, 2);
  TransportProblem pr = TransportProblem::constant_coefficients(
      root, {1.0, 0.0}, 0.0, Poly::constant(1, 0.0));
  pr.f_kind = TransportProblem::SourceKind::Piecewise1D;
  pr.f_pieces = {{0.0, 1.0 / M_PI, Poly::constant(1, 1.0)},
                 {1.0 / M_PI, 1.0, Poly::constant(1, 0.0)}};
  DiscretizationConfig cfg = default_cfg();
  double prev = 1e300;
  SimplicialMesh mesh = pr.root;
  for (int level = 0; level < 3; ++level) {
    const SubgridPair pair = make_subgrid(mesh, 1);
    const PerturbedData data = project_data(pr, pair, cfg);
    const double osc = data_oscillation(pr, data, pair, cfg);
    CHECK(osc <= prev + 1e-12);
    prev = osc;
    std::set<int> all(mesh.leaves.begin(), mesh.leaves.end());
    mesh = refine(mesh, all, 1);
  }
}

TEST_CASE("point evaluation hooks") {
  const SimplicialMesh root = build_root_mesh_box(0, 1, 0, 1, 1);
  const Poly f = Poly::var(2, 0) * 2.0;  // 2x
  const TransportProblem pr =
      TransportProblem::constant_coefficients(root, {1.0, 0.0}, 0.0, f);
  CHECK(pr.b_at({0.3, 0.3}).x == doctest::Approx(1.0));
  CHECK(pr.f_at({0.25, 0.1}) == doctest::Approx(0.5));
  CHECK(pr.c_at({0.7, 0.2}) == doctest::Approx(0.0));
  const Poly w = Poly::var(2, 0) * Poly::var(2, 0);  // x^2
  CHECK(w.derivative(0)(0.3, 0.0) == doctest::Approx(0.6));
  CHECK_THROWS(pr.b_poly(99));
}

TEST_CASE("orthonormal cell bases have identity Gram") {
  for (int dim = 1; dim <= 2; ++dim) {
    const SimplicialMesh m = dim == 1 ? build_root_mesh_interval(0, 1, 2)
                                      : build_root_mesh_box(0, 1, 0, 1, 1);
    const int deg = 2;
    for (int c : m.leaves) {
      const auto basis = orthonormal_cell_basis(m, c, deg);
      CHECK(static_cast<int>(basis.size()) == poly_space_dim(dim, deg));
      const QuadRule q = cell_rule(dim, m.cell_vertices(c), 2 * deg + 2);
      for (size_t i = 0; i < basis.size(); ++i)
        for (size_t j = 0; j < basis.size(); ++j) {
          const double g = q.integrate_product(basis[i], basis[j]);
          CHECK(std::abs(g - (i == j ? 1.0 : 0.0)) <= 1e-13);
        }
    }
  }
}
