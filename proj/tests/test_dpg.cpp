#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <cmath>
#include <random>
#include <set>

#include "dpgt/dpg.hpp"
#include "dpgt/quadrature.hpp"

using namespace dpgt;

namespace {

struct Pipeline {
  TransportProblem problem;
  SubgridPair pair;
  FaceClassification faces;
  TrialSpace trial;
  TestSpace test;
  PerturbedData data;
  DpgSystem sys;
};

Pipeline make_pipeline(TransportProblem problem, const SimplicialMesh& mesh,
                       const DiscretizationConfig& cfg) {
  auto p = std::make_unique<Pipeline>();
  Pipeline pl;
  pl.problem = std::move(problem);
  pl.pair = make_subgrid(mesh, cfg.subgrid_depth);
  pl.faces = classify_faces(pl.pair.coarse, pl.problem.convection_fn(),
                            pl.problem.b_scale());
  pl.trial = build_trial_space(pl.pair.coarse, cfg, pl.faces);
  pl.test = build_test_space(pl.pair.fine, cfg);
  pl.data = project_data(pl.problem, pl.pair, cfg);
  return pl;
}

// assemble after the pipeline pieces are pinned in memory
struct Assembled {
  std::unique_ptr<Pipeline> pl;
  DpgSystem sys;
};

Assembled assemble_all(TransportProblem problem, const SimplicialMesh& mesh,
                       const DiscretizationConfig& cfg) {
  Assembled a;
  a.pl = std::make_unique<Pipeline>();
  a.pl->problem = std::move(problem);
  a.pl->pair = make_subgrid(mesh, cfg.subgrid_depth);
  a.pl->faces = classify_faces(a.pl->pair.coarse,
                               a.pl->problem.convection_fn(),
                               a.pl->problem.b_scale());
  a.pl->trial = build_trial_space(a.pl->pair.coarse, cfg, a.pl->faces);
  a.pl->test = build_test_space(a.pl->pair.fine, cfg);
  a.pl->data = project_data(a.pl->problem, a.pl->pair, cfg);
  a.sys = assemble_system(a.pl->problem, a.pl->data, a.pl->trial, a.pl->test,
                          a.pl->pair, cfg);
  return a;
}

DiscretizationConfig cfg_11(int subgrid = 1) {
  DiscretizationConfig cfg;
  cfg.m_u = 1;
  cfg.m_w = 1;
  cfg.m_v = 2;
  cfg.subgrid_depth = subgrid;
  return cfg;
}

// coefficients of the constant-one function in the broken test basis
Eigen::VectorXd one_in_test_basis(const DpgSystem& sys) {
  const TestSpace& vs = *sys.test;
  const SimplicialMesh& fine = sys.pair->fine;
  Eigen::VectorXd v = Eigen::VectorXd::Zero(vs.dim());
  for (int fi = 0; fi < fine.n_leaves(); ++fi) {
    const QuadRule q =
        cell_rule(fine.dim, fine.cell_vertices(fine.leaves[fi]),
                  2 * vs.m_v + 2);
    for (size_t k = 0; k < vs.basis[fi].size(); ++k)
      v[vs.offset(fi) + k] = q.integrate(vs.basis[fi][k]);
  }
  return v;
}

TrialFunction nodal_w_interpolant(const TrialSpace& ts,
                                  const std::function<double(Vec2)>& f) {
  TrialFunction fn(ts);
  for (size_t n = 0; n < ts.nodes.size(); ++n) {
    const int gi = ts.w_index(static_cast<int>(n));
    if (gi >= 0) fn.coeffs[gi] = f(ts.nodes[n]);
  }
  return fn;
}

// u-part := L2 projection of a polynomial per cell
void set_u_part(TrialFunction& fn, const Poly& u) {
  const TrialSpace& ts = *fn.space;
  for (int ci = 0; ci < ts.mesh->n_leaves(); ++ci) {
    const QuadRule q = cell_rule(
        ts.mesh->dim, ts.mesh->cell_vertices(ts.mesh->leaves[ci]),
        2 * ts.m_u + 2 + u.total_degree());
    for (int k = 0; k < ts.u_loc_dim; ++k)
      fn.coeffs[ts.u_offset(ci) + k] =
          q.integrate_product(u, ts.u_basis[ci][k]);
  }
}

}  // namespace

TEST_CASE("hand-checked broken form values on one cell") {
  // single cell (0,1), b=1, c=0, f=0
  const SimplicialMesh mesh = build_root_mesh_interval(0, 1, 1);
  TransportProblem pr = TransportProblem::constant_coefficients(
      mesh, {1, 0}, 0.0, Poly::constant(1, 0.0));
  const DiscretizationConfig cfg = cfg_11(1);
  Assembled a = assemble_all(std::move(pr), mesh, cfg);
  const Eigen::VectorXd vone = one_in_test_basis(a.sys);

  SUBCASE("u=0, w=x gives b(u,w;1) = 1") {
    TrialFunction fn =
        nodal_w_interpolant(a.pl->trial, [](Vec2 p) { return p.x; });
    const Eigen::VectorXd bx = a.sys.B * fn.coeffs;
    CHECK(bx.dot(vone) == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("u=1, w=0 gives b(u,0;1) = 0") {
    TrialFunction fn(a.pl->trial);
    set_u_part(fn, Poly::constant(1, 1.0));
    const Eigen::VectorXd bx = a.sys.B * fn.coeffs;
    CHECK(std::abs(bx.dot(vone)) <= 1e-13);
  }
}

TEST_CASE("exact pair annihilates the residual") {
  // b=1, c=0, f=1: u_ex = x lies in the trial space
  const SimplicialMesh mesh = build_root_mesh_interval(0, 1, 2);
  TransportProblem pr = TransportProblem::constant_coefficients(
      mesh, {1, 0}, 0.0, Poly::constant(1, 1.0));
  const DiscretizationConfig cfg = cfg_11(1);
  Assembled a = assemble_all(std::move(pr), mesh, cfg);
  TrialFunction fn =
      nodal_w_interpolant(a.pl->trial, [](Vec2 p) { return p.x; });
  set_u_part(fn, Poly::var(1, 0));
  const Eigen::VectorXd resid = a.sys.B * fn.coeffs - a.sys.F;
  CHECK(resid.lpNorm<Eigen::Infinity>() <= 1e-13);
}

TEST_CASE("assembled rows replay through independent quadrature") {
  const SimplicialMesh mesh = build_root_mesh_box(0, 1, 0, 1, 1);
  TransportProblem pr = TransportProblem::constant_coefficients(
      mesh, {1.0, 0.4}, 0.7, Poly::var(2, 0) + Poly::constant(2, 1.0));
  DiscretizationConfig cfg = cfg_11(1);
  Assembled a = assemble_all(std::move(pr), mesh, cfg);
  std::mt19937_64 rng(2);
  std::normal_distribution<double> dist;
  TrialFunction fn(a.pl->trial);
  for (int i = 0; i < fn.coeffs.size(); ++i) fn.coeffs[i] = dist(rng);
  const Eigen::VectorXd bx = a.sys.B * fn.coeffs;
  for (int t = 0; t < 20; ++t) {
    const int fi = static_cast<int>(rng() % a.pl->pair.fine.n_leaves());
    const int k = static_cast<int>(rng() % a.pl->test.basis[fi].size());
    const double direct =
        broken_form_cell(a.sys, fn, fi, a.pl->test.basis[fi][k]);
    CHECK(std::abs(direct - bx[a.pl->test.offset(fi) + k]) <=
          1e-11 * (1.0 + std::abs(direct)));
  }
}

TEST_CASE("PG solve recovers representable exact solutions") {
  SUBCASE("1D: u_ex = x") {
    const SimplicialMesh mesh = build_root_mesh_interval(0, 1, 3);
    TransportProblem pr = TransportProblem::constant_coefficients(
        mesh, {1, 0}, 0.0, Poly::constant(1, 1.0));
    pr.u_exact = [](const Vec2& p) { return p.x; };
    pr.b_grad_u_exact = [](const Vec2&) { return 1.0; };
    Assembled a = assemble_all(std::move(pr), mesh, cfg_11(1));
    const TrialFunction fn = solve_pg(a.sys);
    const LiftedResidual rd = project_residual(a.sys, fn);
    CHECK(std::sqrt(rd.total_norm_sq) <= 1e-11);
    const ExactError err = exact_error(a.sys, fn);
    CHECK(err.u_l2 <= 1e-10);
    CHECK(err.w_hb <= 1e-10);
  }
  SUBCASE("2D: u_ex = x with reaction") {
    const SimplicialMesh mesh = build_root_mesh_box(0, 1, 0, 1, 2);
    TransportProblem pr = TransportProblem::constant_coefficients(
        mesh, {1, 0}, 1.0, Poly::constant(2, 1.0) + Poly::var(2, 0));
    pr.u_exact = [](const Vec2& p) { return p.x; };
    pr.b_grad_u_exact = [](const Vec2&) { return 1.0; };
    Assembled a = assemble_all(std::move(pr), mesh, cfg_11(1));
    const TrialFunction fn = solve_pg(a.sys);
    const ExactError err = exact_error(a.sys, fn);
    CHECK(err.u_l2 <= 1e-10);
    CHECK(err.w_hb <= 1e-10);
  }
  SUBCASE("f = 0 gives the zero solution") {
    const SimplicialMesh mesh = build_root_mesh_interval(0, 1, 2);
    TransportProblem pr = TransportProblem::constant_coefficients(
        mesh, {1, 0}, 0.5, Poly::constant(1, 0.0));
    Assembled a = assemble_all(std::move(pr), mesh, cfg_11(1));
    const TrialFunction fn = solve_pg(a.sys);
    CHECK(fn.coeffs.norm() <= 1e-12);
  }
}

TEST_CASE("L2 convergence rate is m_u + 1 for the smooth 1D problem") {
  // b=1, c=1, f=1: u_ex = 1 - exp(-x).  The u-rate m_u+1 needs m_w = m_u+1:
  // quasi-optimality is in the pair norm, whose w-part converges at m_w.
  DiscretizationConfig cfg;
  cfg.m_u = 1;
  cfg.m_w = 2;
  cfg.m_v = 3;
  cfg.subgrid_depth = 1;
  std::vector<double> errors;
  for (int level = 0; level < 4; ++level) {
    const int n = 2 << level;
    const SimplicialMesh mesh = build_root_mesh_interval(0, 1, n);
    TransportProblem pr = TransportProblem::constant_coefficients(
        mesh, {1, 0}, 1.0, Poly::constant(1, 1.0));
    pr.u_exact = [](const Vec2& p) { return 1.0 - std::exp(-p.x); };
    pr.b_grad_u_exact = [](const Vec2& p) { return std::exp(-p.x); };
    Assembled a = assemble_all(std::move(pr), mesh, cfg);
    const TrialFunction fn = solve_pg(a.sys);
    errors.push_back(exact_error(a.sys, fn).u_l2);
  }
  for (size_t i = 1; i < errors.size(); ++i) {
    const double rate = std::log2(errors[i - 1] / errors[i]);
    CHECK(rate == doctest::Approx(2.0).epsilon(0.1));  // m_u + 1 = 2
  }
}

TEST_CASE("orthogonality, minimality and the lift relation") {
  const SimplicialMesh mesh = build_root_mesh_interval(0, 1, 4);
  TransportProblem pr = TransportProblem::constant_coefficients(
      mesh, {1, 0}, 1.0, poly_1d({0.5, 1.0}));
  Assembled a = assemble_all(std::move(pr), mesh, cfg_11(1));
  const TrialFunction star = solve_pg(a.sys);
  const LiftedResidual rstar = project_residual(a.sys, star);
  std::mt19937_64 rng(6);
  std::normal_distribution<double> dist;

  SUBCASE("orthogonality against 20 random trial perturbations") {
    for (int t = 0; t < 20; ++t) {
      Eigen::VectorXd y = star.coeffs;
      for (int i = 0; i < y.size(); ++i) y[i] += dist(rng);
      const LiftedResidual ry = project_residual(a.sys, y);
      const Eigen::VectorXd tdir =
          trial_to_test(a.sys, (y - star.coeffs).eval());
      const double lhs = ry.total_norm_sq - rstar.total_norm_sq -
                         test_norm_sq(a.sys, tdir);
      CHECK(std::abs(lhs) <= 1e-10 * ry.total_norm_sq);
    }
  }
  SUBCASE("minimality under random eps-perturbations") {
    for (int t = 0; t < 10; ++t) {
      Eigen::VectorXd d(star.coeffs.size());
      for (int i = 0; i < d.size(); ++i) d[i] = dist(rng);
      d *= 1e-3 / d.norm();
      const LiftedResidual rp =
          project_residual(a.sys, (star.coeffs + d).eval());
      CHECK(rp.total_norm_sq >= rstar.total_norm_sq - 1e-14);
    }
  }
  SUBCASE("residual difference equals the mapped trial difference") {
    Eigen::VectorXd x1(star.coeffs.size()), x2(star.coeffs.size());
    for (int i = 0; i < x1.size(); ++i) {
      x1[i] = dist(rng);
      x2[i] = dist(rng);
    }
    const LiftedResidual r1 = project_residual(a.sys, x1);
    const LiftedResidual r2 = project_residual(a.sys, x2);
    const Eigen::VectorXd t12 = trial_to_test(a.sys, (x1 - x2).eval());
    // compare coefficient vectors cell by cell
    double drift = 0.0;
    for (int fi = 0; fi < a.pl->pair.fine.n_leaves(); ++fi) {
      const Eigen::VectorXd diff =
          r1.cell_coeffs[fi] - r2.cell_coeffs[fi] -
          t12.segment(a.sys.G.block_offset(fi), a.sys.G.block_size(fi));
      drift = std::max(drift, diff.lpNorm<Eigen::Infinity>());
    }
    CHECK(drift <= 1e-12 * (1.0 + t12.lpNorm<Eigen::Infinity>()));
    CHECK(test_norm_sq(a.sys, t12) >= 0.0);
  }
}

TEST_CASE("a-posteriori two-sided bound stays bracketed under refinement") {
  // polynomial data (osc = 0), known exact solution
  std::vector<double> ratios;
  for (int level = 0; level < 3; ++level) {
    const int n = 2 << level;
    const SimplicialMesh mesh = build_root_mesh_interval(0, 1, n);
    TransportProblem pr = TransportProblem::constant_coefficients(
        mesh, {1, 0}, 1.0, Poly::constant(1, 1.0));
    pr.u_exact = [](const Vec2& p) { return 1.0 - std::exp(-p.x); };
    pr.b_grad_u_exact = [](const Vec2& p) { return std::exp(-p.x); };
    Assembled a = assemble_all(std::move(pr), mesh, cfg_11(1));
    const TrialFunction fn = solve_pg(a.sys);
    const LiftedResidual rd = project_residual(a.sys, fn);
    const ExactError err = exact_error(a.sys, fn);
    ratios.push_back(std::sqrt(rd.total_norm_sq / err.combined_sq()));
  }
  for (double r : ratios) {
    CHECK(r < 50.0);
    CHECK(r > 1.0 / 50.0);
  }
  for (size_t i = 1; i < ratios.size(); ++i)
    CHECK(std::abs(ratios[i] / ratios[i - 1] - 1.0) < 0.2);
}

TEST_CASE("discrete inf-sup diagnostic") {
  const SimplicialMesh mesh = build_root_mesh_interval(0, 1, 2);
  TransportProblem pr = TransportProblem::constant_coefficients(
      mesh, {1, 0}, 0.0, Poly::constant(1, 1.0));

  SUBCASE("positive and matching a dense generalized eigensolver") {
    Assembled a = assemble_all(pr, mesh, cfg_11(1));
    const InfsupEstimate est = estimate_discrete_infsup(a.sys);
    CHECK(est.converged);
    CHECK(est.gamma > 0.0);
    const Eigen::MatrixXd sd(a.sys.S);
    const Eigen::MatrixXd md(trial_norm_gram(a.sys));
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> ges(sd, md);
    const double oracle = std::sqrt(ges.eigenvalues()(0));
    CHECK(est.gamma == doctest::Approx(oracle).epsilon(1e-6));
  }
  SUBCASE("deeper subgrids never decrease the estimate") {
    Assembled a1 = assemble_all(pr, mesh, cfg_11(1));
    Assembled a2 = assemble_all(pr, mesh, cfg_11(2));
    const double g1 = estimate_discrete_infsup(a1.sys).gamma;
    const double g2 = estimate_discrete_infsup(a2.sys).gamma;
    CHECK(g2 >= g1 - 1e-10);
  }
}
