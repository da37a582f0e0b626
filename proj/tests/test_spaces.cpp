#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <set>

#include "dpgt/quadrature.hpp"
#include "dpgt/spaces.hpp"

using namespace dpgt;

namespace {

FaceClassification classify_const(const SimplicialMesh& m, const Vec2& b) {
  return classify_faces(m, [b](const Vec2&) { return b; }, norm(b));
}

DiscretizationConfig cfg_uw(int mu, int mw, int mv) {
  DiscretizationConfig cfg;
  cfg.m_u = mu;
  cfg.m_w = mw;
  cfg.m_v = mv;
  return cfg;
}

}  // namespace

TEST_CASE("trial space dimensions") {
  SUBCASE("1D, 2 cells, m_u=0, m_w=1: inflow node eliminated") {
    const SimplicialMesh m = build_root_mesh_interval(0, 1, 2);
    const TrialSpace ts =
        build_trial_space(m, cfg_uw(0, 1, 2), classify_const(m, {1, 0}));
    CHECK(ts.dim_u == 2);
    CHECK(ts.dim_w == 2);  // 3 nodes - 1 constrained at x=0
    CHECK(ts.dim() == 4);
  }
  SUBCASE("1D, 1 cell, m_u=1, m_w=1") {
    const SimplicialMesh m = build_root_mesh_interval(0, 1, 1);
    const TrialSpace ts =
        build_trial_space(m, cfg_uw(1, 1, 2), classify_const(m, {1, 0}));
    CHECK(ts.dim() == 3);  // 2 + (2 - 1)
  }
  SUBCASE("2D two-triangle square, m_w=1: both x=0 nodes constrained") {
    const SimplicialMesh m = build_root_mesh_box(0, 1, 0, 1, 1);
    const TrialSpace ts =
        build_trial_space(m, cfg_uw(0, 1, 2), classify_const(m, {1, 0}));
    CHECK(ts.dim_w == 2);  // 4 corners - 2 on the inflow side
  }
}

TEST_CASE("test space: per-cell orthonormal blocks") {
  SUBCASE("1D, m_v=2: 3 functions per cell") {
    const SimplicialMesh m = build_root_mesh_interval(0, 1, 1);
    const TestSpace vs = build_test_space(m, cfg_uw(0, 1, 2));
    CHECK(vs.loc_dim == 3);
    CHECK(vs.dim() == 3);
  }
  SUBCASE("2D triangle, m_v=2: 6 per cell, Gram = identity") {
    const SimplicialMesh m = build_root_mesh_box(0, 1, 0, 1, 1);
    const TestSpace vs = build_test_space(m, cfg_uw(0, 1, 2));
    CHECK(vs.loc_dim == 6);
    for (int li = 0; li < m.n_leaves(); ++li) {
      const QuadRule q = cell_rule(2, m.cell_vertices(m.leaves[li]), 8);
      for (int i = 0; i < 6; ++i)
        for (int j = 0; j < 6; ++j) {
          const double g = q.integrate_product(vs.basis[li][i],
                                               vs.basis[li][j]);
          CHECK(std::abs(g - (i == j ? 1.0 : 0.0)) <= 1e-13);
        }
    }
  }
}

TEST_CASE("w-block is continuous and vanishes on the inflow boundary") {
  const SimplicialMesh m = build_root_mesh_box(0, 1, 0, 1, 2);
  const DiscretizationConfig cfg = cfg_uw(1, 2, 3);
  const TrialSpace ts = build_trial_space(m, cfg, classify_const(m, {1, 0}));
  std::mt19937_64 rng(3);
  std::normal_distribution<double> dist;
  TrialFunction fn(ts);
  for (int i = 0; i < fn.coeffs.size(); ++i) fn.coeffs[i] = dist(rng);
  // continuity at shared nodes from both adjacent cells
  for (int li = 0; li < m.n_leaves(); ++li) {
    const int cell = m.leaves[li];
    for (int f = 0; f < 3; ++f) {
      const int nb = m.face_neighbor(cell, f);
      if (nb < 0) continue;
      const int nli = m.leaf_index(nb);
      const auto fv = m.face_vertices(cell, f);
      const Vec2 mid =
          (m.vertices[fv[0]] + m.vertices[fv[1]]) * 0.5;
      const double a = fn.eval_w(li, mid);
      const double b = fn.eval_w(nli, mid);
      CHECK(std::abs(a - b) <= 1e-13 * (1.0 + std::abs(a)));
    }
  }
  // inflow trace zero at every node on x = 0
  for (size_t n = 0; n < ts.nodes.size(); ++n)
    if (std::abs(ts.nodes[n].x) < 1e-14) CHECK(ts.node_dof[n] == -1);
  for (int li = 0; li < m.n_leaves(); ++li) {
    bool touches = false;
    for (int gn : ts.cell_nodes[li])
      if (std::abs(ts.nodes[gn].x) < 1e-14) touches = true;
    if (!touches) continue;
    for (double t : {0.1, 0.45, 0.8}) {
      const Vec2 p{0.0, t};
      if (m.locate(p) == m.leaves[li])
        CHECK(std::abs(fn.eval_w(li, p)) <= 1e-12);
    }
  }
}

TEST_CASE("trial function evaluation basics") {
  const SimplicialMesh m = build_root_mesh_interval(0, 1, 1);
  const DiscretizationConfig cfg = cfg_uw(0, 1, 2);
  const TrialSpace ts = build_trial_space(m, cfg, classify_const(m, {1, 0}));
  SUBCASE("zero coefficients evaluate to zero") {
    const TrialFunction fn(ts);
    CHECK(fn.eval_u(0, {0.3, 0}) == 0.0);
    CHECK(fn.eval_w(0, {0.3, 0}) == 0.0);
  }
  SUBCASE("w equals the nodal interpolant of x") {
    TrialFunction fn(ts);
    for (size_t n = 0; n < ts.nodes.size(); ++n) {
      const int gi = ts.w_index(static_cast<int>(n));
      if (gi >= 0) fn.coeffs[gi] = ts.nodes[n].x;
    }
    CHECK(fn.eval_w(0, {0.7, 0}) == doctest::Approx(0.7));
    CHECK(fn.grad_w(0, {0.2, 0}).x == doctest::Approx(1.0));
  }
  SUBCASE("piecewise-constant u-part") {
    const SimplicialMesh m2 = build_root_mesh_interval(0, 1, 2);
    const TrialSpace ts2 =
        build_trial_space(m2, cfg, classify_const(m2, {1, 0}));
    TrialFunction fn(ts2);
    // cell 0 basis is 1/sqrt(h); scale so the function value is 3
    fn.coeffs[0] = 3.0 / ts2.u_basis[0][0].at({0.25, 0});
    CHECK(fn.eval_u(0, {0.1, 0}) == doctest::Approx(3.0));
    CHECK(fn.eval_u(1, {0.9, 0}) == doctest::Approx(0.0));
  }
}

TEST_CASE("nestedness: re-expansion on a refinement is exact") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> dist;
  for (int dim = 1; dim <= 2; ++dim) {
    const SimplicialMesh m = dim == 1 ? build_root_mesh_interval(0, 1, 2)
                                      : build_root_mesh_box(0, 1, 0, 1, 1);
    const DiscretizationConfig cfg = cfg_uw(1, 1, 2);
    const Vec2 b{1, 0};
    const TrialSpace coarse = build_trial_space(m, cfg, classify_const(m, b));
    std::set<int> all(m.leaves.begin(), m.leaves.end());
    const SimplicialMesh fm = refine(m, all, 2);
    const TrialSpace finer =
        build_trial_space(fm, cfg, classify_const(fm, b));
    TrialFunction fn(coarse);
    for (int i = 0; i < fn.coeffs.size(); ++i) fn.coeffs[i] = dist(rng);
    const TrialFunction re = reexpand(fn, finer);
    // L2 drift of both components over the fine cells
    double err = 0.0;
    for (int li = 0; li < fm.n_leaves(); ++li) {
      const int cell = fm.leaves[li];
      const int src = m.leaf_index(fm.ancestor_leaf_in(m, cell));
      const QuadRule q = cell_rule(dim, fm.cell_vertices(cell), 6);
      const Poly du = fn.u_poly(src) - re.u_poly(li);
      const Poly dw = fn.w_poly(src) - re.w_poly(li);
      err += q.integrate_product(du, du) + q.integrate_product(dw, dw);
    }
    CHECK(std::sqrt(err) <= 1e-12);
  }
}

TEST_CASE("partition of unity with constraints disabled") {
  const SimplicialMesh m = build_root_mesh_box(0, 1, 0, 1, 2);
  const DiscretizationConfig cfg = cfg_uw(0, 2, 3);
  const TrialSpace ts =
      build_trial_space(m, cfg, classify_const(m, {1, 0}), false);
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  for (int t = 0; t < 25; ++t) {
    const int li = static_cast<int>(rng() % m.n_leaves());
    const int cell = m.leaves[li];
    const auto vv = m.cell_vertices(cell);
    double l1 = uni(rng), l2 = uni(rng);
    if (l1 + l2 > 1.0) {
      l1 = 1.0 - l1;
      l2 = 1.0 - l2;
    }
    const Vec2 p = vv[0] + (vv[1] - vv[0]) * l1 + (vv[2] - vv[0]) * l2;
    double s = 0.0;
    for (size_t a = 0; a < ts.cell_nodes[li].size(); ++a)
      s += ts.w_shape[li][a].at(p);
    CHECK(s == doctest::Approx(1.0).epsilon(1e-11));
  }
}
