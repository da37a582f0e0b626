#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "dpgt/lifts.hpp"
#include "dpgt/mesh.hpp"
#include "dpgt/problem.hpp"
#include "dpgt/quadrature.hpp"

using namespace dpgt;

namespace {

std::mt19937_64 rng(2024);
std::normal_distribution<double> gauss;
std::uniform_real_distribution<double> uni(0.0, 1.0);

Poly random_poly(int dim, int deg) {
  Poly p(dim);
  for (int i = 0; i <= deg; ++i)
    for (int j = 0; j <= (dim == 2 ? deg - i : 0); ++j)
      p.set_coeff(i, j, gauss(rng));
  return p;
}

// well-shaped random triangle with diameter about `scale`
std::vector<Vec2> random_triangle(double scale) {
  for (;;) {
    std::vector<Vec2> v = {{gauss(rng), gauss(rng)},
                           {gauss(rng), gauss(rng)},
                           {gauss(rng), gauss(rng)}};
    const double d = std::max(
        {dist(v[0], v[1]), dist(v[1], v[2]), dist(v[0], v[2])});
    for (auto& p : v) p = p * (scale / d);
    const double area = triangle_area(v[0], v[1], v[2]);
    const double diam = scale;
    if (4.0 * area / (3.0 * diam) > 0.15 * diam) return v;  // shape guard
  }
}

LocalResidualData direct_data(const CharacteristicFrame& fr, const Poly& mu,
                              const Poly& lam, const Poly& gam, double ctil,
                              double d) {
  LocalResidualData data;
  data.mu = mu;
  data.lam = lam;
  data.gam = gam;
  data.ctil = Poly::constant(fr.dim, ctil);
  data.d = d;
  data.bnorm = fr.bnorm;
  return data;
}

}  // namespace

TEST_CASE("frame geometry in 1D") {
  const double h = 0.3;
  const CharacteristicFrame fr =
      build_frame(1, {{0.0, 0.0}, {h, 0.0}}, {1.0, 0.0});
  CHECK(fr.xminus[0].b == doctest::Approx(0.0));
  CHECK(fr.xplus[0].b == doctest::Approx(h));
  CHECK(fr.r_at(0.0) == doctest::Approx(h));
  CHECK(fr.single_inflow);
  CHECK(fr.shadow_verts.size() == 2);
  CHECK(fr.sa == doctest::Approx(0.0));
  CHECK(fr.sb == doctest::Approx(0.0));
}

TEST_CASE("frame geometry on the reference triangle") {
  const std::vector<Vec2> tri = {{0, 0}, {1, 0}, {0, 1}};
  SUBCASE("b=(1,0): one inflow face, cell equals its hull") {
    const CharacteristicFrame fr = build_frame(2, tri, {1, 0});
    CHECK(fr.single_inflow);
    CHECK(fr.n_inflow_faces == 1);
    // x_-(y) = 0 and x_+(y) = 1-y in frame coordinates (= physical here)
    for (double y : {0.1, 0.4, 0.8}) {
      CHECK(fr.xminus_at(y) == doctest::Approx(0.0).epsilon(1e-12));
      CHECK(fr.r_at(y) == doctest::Approx(1.0 - y).epsilon(1e-9));
    }
    // shadow triangle has the same area as the cell
    CHECK(triangle_area(fr.shadow_verts[0], fr.shadow_verts[1],
                        fr.shadow_verts[2]) ==
          doctest::Approx(0.5).epsilon(1e-9));
    CHECK(std::abs(fr.sa) <= 1e-12);
  }
  SUBCASE("b=(1,1)/sqrt2: two inflow faces, strictly larger hull") {
    const double s = 1.0 / std::sqrt(2.0);
    const CharacteristicFrame fr = build_frame(2, tri, {s, s});
    CHECK(!fr.single_inflow);
    CHECK(fr.n_inflow_faces == 2);
    const double hull_area = triangle_area(
        fr.shadow_verts[0], fr.shadow_verts[1], fr.shadow_verts[2]);
    CHECK(hull_area > 0.5 + 1e-6);
  }
}

TEST_CASE("special inner product hand values") {
  const double h = 0.4;
  const CharacteristicFrame fr =
      build_frame(1, {{0.0, 0.0}, {h, 0.0}}, {1.0, 0.0});
  const Poly one = Poly::constant(1, 1.0);
  const Poly x = Poly::var(1, 0);
  CHECK(special_inner_product(fr, one, one) == doctest::Approx(h));
  CHECK(special_inner_product(fr, x, x) == doctest::Approx(h));
  SUBCASE("bilinear and symmetric on random polynomials") {
    for (int t = 0; t < 10; ++t) {
      const Poly a = random_poly(1, 3), b = random_poly(1, 3),
                 c = random_poly(1, 3);
      const double s1 = special_inner_product(fr, a, b);
      const double s2 = special_inner_product(fr, b, a);
      CHECK(std::abs(s1 - s2) <= 1e-13 * (1.0 + std::abs(s1)));
      const double lin =
          special_inner_product(fr, a + c * 2.0, b) -
          (special_inner_product(fr, a, b) +
           2.0 * special_inner_product(fr, c, b));
      CHECK(std::abs(lin) <= 1e-12 * (1.0 + std::abs(s1)));
    }
  }
}

TEST_CASE("closed-form 1D lift for constant data") {
  // mu = 1, lam = 2, ctil = 0, d = 0 => gam = 2, |b| = 1
  const double h = 0.25;
  const CharacteristicFrame fr =
      build_frame(1, {{0.0, 0.0}, {h, 0.0}}, {1.0, 0.0});
  const LocalResidualData data =
      direct_data(fr, Poly::constant(1, 1.0), Poly::constant(1, 2.0),
                  Poly::constant(1, 2.0), 0.0, 0.0);
  const LocalLift lift = exact_modified_lift(fr, data);
  REQUIRE(lift.piece_poly.size() == 1);
  // reference: -x^2 + (1 + 2h) x + 2
  for (double x : {0.0, 0.1, 0.2, h}) {
    const double expected = -x * x + (1.0 + 2.0 * h) * x + 2.0;
    CHECK(lift.piece_poly[0](x) == doctest::Approx(expected).epsilon(1e-13));
  }
  SUBCASE("approximate lift is x + 2 and the gap is O(h)") {
    const Poly approx = approximate_lift(fr, data);
    for (double x : {0.0, 0.1, h})
      CHECK(approx(x) == doctest::Approx(x + 2.0).epsilon(1e-13));
  }
  SUBCASE("zero data lifts to zero") {
    const LocalResidualData zero =
        direct_data(fr, Poly(1), Poly(1), Poly(1), 0.0, 0.0);
    const LocalLift lz = exact_modified_lift(fr, zero);
    CHECK(lz.piece_poly[0].is_zero(1e-15));
    CHECK(approximate_lift(fr, zero).is_zero(1e-15));
  }
}

TEST_CASE("variational identity for the exact lift") {
  // <<R, v>> must equal the local modified form minus the load, for any v
  for (int dim = 1; dim <= 2; ++dim) {
    for (int t = 0; t < 30; ++t) {
      std::vector<Vec2> verts;
      Vec2 bvec;
      if (dim == 1) {
        const double a = gauss(rng);
        verts = {{a, 0.0}, {a + 0.05 + 0.3 * uni(rng), 0.0}};
        bvec = {0.5 + uni(rng), 0.0};
        if (uni(rng) < 0.3) bvec.x = -bvec.x;  // flow to the left
      } else {
        verts = random_triangle(0.2 + 0.3 * uni(rng));
        const double ang = 2 * M_PI * uni(rng);
        const double mag = 0.6 + uni(rng);
        bvec = {mag * std::cos(ang), mag * std::sin(ang)};
      }
      // variable data: affine btilde around its average, polynomial ctilde
      std::array<Poly, 2> bt = {Poly::constant(dim, bvec.x),
                                Poly::constant(dim, bvec.y)};
      if (t % 2 == 1) {
        bt[0] += (Poly::var(dim, 0) -
                  Poly::constant(dim, verts[0].x)) * (0.1 * gauss(rng));
        if (dim == 2)
          bt[1] += (Poly::var(dim, 1) -
                    Poly::constant(dim, verts[0].y)) * (0.1 * gauss(rng));
      }
      const QuadRule qc = cell_rule(dim, verts, 20);
      const double vol = dim == 1 ? std::abs(verts[1].x - verts[0].x)
                                  : triangle_area(verts[0], verts[1],
                                                  verts[2]);
      const Vec2 b_avg = {qc.integrate(bt[0]) / vol,
                          dim == 2 ? qc.integrate(bt[1]) / vol : 0.0};
      const Poly divb = bt[0].derivative(0) +
                        (dim == 2 ? bt[1].derivative(1) : Poly(dim));
      const double d_avg = qc.integrate(divb) / vol;

      const CharacteristicFrame fr = build_frame(dim, verts, b_avg);
      const Poly u = random_poly(dim, 1), w = random_poly(dim, 2);
      const Poly ct = random_poly(dim, 1) * 0.5;
      const Poly ft = random_poly(dim, 1);
      const LocalResidualData data =
          make_local_data(fr, u, w, bt, ct, ft, d_avg);
      const LocalLift lift = exact_modified_lift(fr, data);
      for (int k = 0; k < 5; ++k) {
        const Poly v = random_poly(dim, 3);
        const Poly vf = fr.to_frame_poly(v);
        const double lhs =
            special_inner_product(fr, lift, LocalLift::broadcast(fr, vf));
        const double rhs =
            modified_form(fr, u, w, bt, ct, d_avg, v) -
            qc.integrate_product(ft, v);
        CHECK(std::abs(lhs - rhs) <= 1e-10 * (1.0 + std::abs(rhs)));
      }
    }
  }
}

TEST_CASE("strong form of the lift on each subdivision piece") {
  for (int t = 0; t < 10; ++t) {
    const std::vector<Vec2> verts = random_triangle(0.3);
    const double ang = 2 * M_PI * uni(rng);
    const Vec2 bvec = {std::cos(ang), std::sin(ang)};
    const CharacteristicFrame fr = build_frame(2, verts, bvec);
    const Poly mu = random_poly(2, 2), lam = random_poly(2, 2);
    // gam independent here: the strong form only involves gam and mu
    const Poly gam = random_poly(2, 2);
    const LocalResidualData data = direct_data(fr, mu, lam, gam, 0.0, 0.0);
    const LocalLift lift = exact_modified_lift(fr, data);
    for (size_t p = 0; p < fr.pieces.size(); ++p) {
      const auto& piece = fr.pieces[p];
      // random interior points by barycentric sampling
      for (int s = 0; s < 5; ++s) {
        double l1 = uni(rng), l2 = uni(rng);
        if (l1 + l2 > 1) {
          l1 = 1 - l1;
          l2 = 1 - l2;
        }
        const Vec2 q = piece.verts[0] +
                       (piece.verts[1] - piece.verts[0]) * l1 +
                       (piece.verts[2] - piece.verts[0]) * l2;
        const double d2 =
            lift.piece_poly[p].derivative(0).derivative(0).at(q) *
            fr.bnorm * fr.bnorm;
        CHECK(std::abs(-d2 - gam.at(q)) <= 1e-10 * (1.0 + std::abs(d2)));
      }
    }
  }
}

TEST_CASE("approximate lift: flow derivative reproduces the entry trace") {
  for (int t = 0; t < 10; ++t) {
    const std::vector<Vec2> verts = random_triangle(0.4);
    const double ang = 2 * M_PI * uni(rng);
    const CharacteristicFrame fr =
        build_frame(2, verts, {std::cos(ang), std::sin(ang)});
    const Poly mu = random_poly(2, 2), lam = random_poly(2, 2);
    const LocalResidualData data = direct_data(fr, mu, lam, mu, 0.3, 0.1);
    const Poly approx = approximate_lift(fr, data);
    const Poly dflow = approx.derivative(0) * fr.bnorm;
    const Poly trace = mu.substitute_x(fr.sa, fr.sb);
    for (int s = 0; s < 10; ++s) {
      const Vec2 q{gauss(rng), gauss(rng)};
      CHECK(std::abs(dflow.at(q) - trace.at(q)) <=
            1e-11 * (1.0 + std::abs(trace.at(q))));
    }
  }
}

TEST_CASE("modified form agrees with the broken form for constant data") {
  // with constant convection the frozen-flux form reduces to the plain
  // integration-by-parts form on the cell
  for (int t = 0; t < 10; ++t) {
    const std::vector<Vec2> verts = random_triangle(0.5);
    const double ang = 2 * M_PI * uni(rng);
    const Vec2 bvec = {1.3 * std::cos(ang), 1.3 * std::sin(ang)};
    const CharacteristicFrame fr = build_frame(2, verts, bvec);
    const std::array<Poly, 2> bt = {Poly::constant(2, bvec.x),
                                    Poly::constant(2, bvec.y)};
    const Poly ct = random_poly(2, 1);
    const Poly u = random_poly(2, 2), w = random_poly(2, 2),
               v = random_poly(2, 2);
    const double lhs = modified_form(fr, u, w, bt, ct, 0.0, v);
    // direct Eq.-(16)-style evaluation: volume against u + full boundary w
    const QuadRule q = cell_rule(2, verts, 24);
    double rhs = q.sum([&](const Vec2& p) {
      const Vec2 gv = {v.derivative(0).at(p), v.derivative(1).at(p)};
      return (ct.at(p) * v.at(p) - dot(bvec, gv)) * u.at(p);
    });
    for (int f = 0; f < 3; ++f) {
      const Vec2& a = verts[(f + 1) % 3];
      const Vec2& b2 = verts[(f + 2) % 3];
      Vec2 n = perp(b2 - a);
      n = n * (1.0 / norm(n));
      if (dot(n, verts[f] - a) > 0.0) n = n * -1.0;
      const QuadRule fq = segment_rule(a, b2, 24);
      rhs += fq.sum([&](const Vec2& p) {
        return dot(bvec, n) * v.at(p) * w.at(p);
      });
    }
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-11));
  }
  SUBCASE("u = w removes every difference term") {
    const std::vector<Vec2> verts = random_triangle(0.5);
    const CharacteristicFrame fr = build_frame(2, verts, {1.0, 0.2});
    const std::array<Poly, 2> bt = {Poly::constant(2, 1.0),
                                    Poly::constant(2, 0.2)};
    const Poly ct = random_poly(2, 1);
    const Poly u = random_poly(2, 2);
    const Poly v = random_poly(2, 2);
    const double lhs = modified_form(fr, u, u, bt, ct, 0.7, v);
    const QuadRule q = cell_rule(2, verts, 24);
    const double rhs = q.sum([&](const Vec2& p) {
      const Vec2 gu = {u.derivative(0).at(p), u.derivative(1).at(p)};
      return (dot({1.0, 0.2}, gu) + ct.at(p) * u.at(p)) * v.at(p);
    });
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-11));
  }
}

TEST_CASE("lift norms and the norm-closeness bound") {
  SUBCASE("zero lift has zero norms") {
    const CharacteristicFrame fr =
        build_frame(1, {{0.0, 0.0}, {0.5, 0.0}}, {1.0, 0.0});
    const LiftNorms n = lift_norms(fr, LocalLift::broadcast(fr, Poly(1)));
    CHECK(n.hb_sq == 0.0);
    CHECK(n.special_sq == 0.0);
  }
  SUBCASE("constant one on (0,h), b=1: both norms equal h") {
    const double h = 0.3;
    const CharacteristicFrame fr =
        build_frame(1, {{0.0, 0.0}, {h, 0.0}}, {1.0, 0.0});
    const LiftNorms n =
        lift_norms(fr, LocalLift::broadcast(fr, Poly::constant(1, 1.0)));
    CHECK(n.hb_sq == doctest::Approx(h));
    CHECK(n.special_sq == doctest::Approx(h));
  }
  SUBCASE("two-norm gap bound over 50 random samples") {
    for (int t = 0; t < 50; ++t) {
      const int dim = (t % 2) + 1;
      std::vector<Vec2> verts;
      Vec2 bvec;
      if (dim == 1) {
        verts = {{0.0, 0.0}, {0.05 + 0.4 * uni(rng), 0.0}};
        bvec = {0.7 + uni(rng), 0.0};
      } else {
        verts = random_triangle(0.1 + 0.4 * uni(rng));
        const double ang = 2 * M_PI * uni(rng);
        const double mag = 0.8 + uni(rng);
        bvec = {mag * std::cos(ang), mag * std::sin(ang)};
      }
      const CharacteristicFrame fr = build_frame(dim, verts, bvec);
      const Poly p = fr.to_frame_poly(random_poly(dim, 3));
      const LiftNorms n = lift_norms(fr, LocalLift::broadcast(fr, p));
      const double gap = std::abs(n.hb_sq - n.special_sq);
      CHECK(gap <= (fr.diam / fr.bnorm) * n.hb_sq * (1.0 + 1e-9));
    }
  }
}

TEST_CASE("gap between exact and approximate lift scales linearly") {
  // fixed polynomial data on a shrinking similar cell family
  std::vector<double> diams, gaps;
  for (int level = 0; level < 6; ++level) {
    const double s = 0.4 * std::pow(0.5, level);
    const std::vector<Vec2> verts = {{0.1, 0.07}, {0.1 + s, 0.07},
                                     {0.1 + 0.31 * s, 0.07 + 0.83 * s}};
    const Vec2 bvec{1.0, 0.35};
    const CharacteristicFrame fr = build_frame(2, verts, bvec);
    // fixed data, evaluated in frame coordinates so it does not shrink
    Poly mu(2), lam(2);
    mu.set_coeff(0, 0, 0.8);
    mu.set_coeff(1, 0, 1.1);
    mu.set_coeff(0, 1, -0.7);
    mu.set_coeff(1, 1, 0.4);
    lam.set_coeff(0, 0, -0.5);
    lam.set_coeff(1, 0, 0.9);
    lam.set_coeff(0, 1, 0.6);
    lam.set_coeff(2, 0, 0.3);
    const Poly gam = lam - mu.derivative(0) * fr.bnorm;  // ctil = d = 0
    const LocalResidualData data = direct_data(fr, mu, lam, gam, 0.0, 0.0);
    const LocalLift exact = exact_modified_lift(fr, data);
    const LocalLift approx =
        LocalLift::broadcast(fr, approximate_lift(fr, data));
    const double gap = std::sqrt(lift_distance_sq(fr, exact, approx));
    const double mu_k = std::sqrt(
        hb_norm_sq_on(fr, fr.shadow_verts, mu));
    const double lam_k = std::sqrt(hb_norm_sq_on(fr, fr.shadow_verts, lam));
    const double mu_h1 = std::sqrt(
        h1_seminorm_sq_on(fr, fr.fverts, mu) +
        hb_norm_sq_on(fr, fr.fverts, mu));
    diams.push_back(fr.diam);
    gaps.push_back(gap / (mu_k + lam_k + mu_h1));
  }
  const double slope =
      std::log(gaps.front() / gaps.back()) /
      std::log(diams.front() / diams.back());
  CHECK(slope == doctest::Approx(1.0).epsilon(0.2));
}

TEST_CASE("coercivity surrogate stays positive across a random suite") {
  double worst = 1e300;
  for (int t = 0; t < 40; ++t) {
    const std::vector<Vec2> verts = random_triangle(0.2 + 0.2 * uni(rng));
    const double ang = 2 * M_PI * uni(rng);
    const double mag = 1.0 + uni(rng);
    const CharacteristicFrame fr =
        build_frame(2, verts, {mag * std::cos(ang), mag * std::sin(ang)});
    if (!fr.length_ok) continue;
    const Poly mu = fr.to_frame_poly(random_poly(2, 2));
    const Poly lam = fr.to_frame_poly(random_poly(2, 2));
    const Poly gam = lam - mu.derivative(0) * fr.bnorm;
    const LocalResidualData data = direct_data(fr, mu, lam, gam, 0.0, 0.0);
    const LocalLift approx =
        LocalLift::broadcast(fr, approximate_lift(fr, data));
    const LiftNorms n = lift_norms(fr, approx);
    const double extra =
        fr.diam * fr.diam *
        (h1_seminorm_sq_on(fr, fr.shadow_verts, mu) +
         h1_seminorm_sq_on(fr, fr.shadow_verts, lam));
    const QuadRule q = cell_rule(2, fr.fverts, 16);
    const double target =
        q.integrate_product(lam, lam) + q.integrate_product(mu, mu);
    if (target > 1e-14)
      worst = std::min(worst, (n.hb_sq + extra) / target);
  }
  CHECK(worst > 0.05);  // recorded constant stays well clear of zero
}

TEST_CASE("exact-vs-approximate lift gap decreases with subgrid depth") {
  // global version per coarse cell over deeper companion grids
  const SimplicialMesh mesh = build_root_mesh_box(0, 1, 0, 1, 1);
  TransportProblem pr = TransportProblem::constant_coefficients(
      mesh, {1.0, 0.3}, 0.5, Poly::constant(2, 1.0));
  DiscretizationConfig cfg;
  cfg.m_u = 1;
  cfg.m_w = 1;
  cfg.m_v = 2;
  const Poly u = random_poly(2, 1);
  const Poly w = random_poly(2, 1);
  std::vector<double> gap_by_depth;
  for (int depth = 1; depth <= 3; ++depth) {
    const SubgridPair pair = make_subgrid(mesh, depth);
    const PerturbedData data = project_data(pr, pair, cfg);
    double gap = 0.0;
    for (int fi = 0; fi < pair.fine.n_leaves(); ++fi) {
      const int cell = pair.fine.leaves[fi];
      const int ci = pair.fine_to_coarse[fi];
      const CharacteristicFrame fr =
          build_frame(2, pair.fine.cell_vertices(cell), data.b_avg[fi]);
      const LocalResidualData ld =
          make_local_data(fr, u, w, data.btilde[ci], data.ctilde[ci],
                          data.ftilde[ci], data.div_avg[fi]);
      const LocalLift exact = exact_modified_lift(fr, ld);
      const LocalLift approx =
          LocalLift::broadcast(fr, approximate_lift(fr, ld));
      gap += lift_distance_sq(fr, exact, approx);
    }
    gap_by_depth.push_back(std::sqrt(gap));
  }
  CHECK(gap_by_depth[1] < gap_by_depth[0]);
  CHECK(gap_by_depth[2] < gap_by_depth[1]);
}
