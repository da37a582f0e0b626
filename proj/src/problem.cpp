#include "dpgt/problem.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "dpgt/quadrature.hpp"

namespace dpgt {

void DiscretizationConfig::validate(bool marking_regime) const {
  if (m_w < 1) throw std::invalid_argument("m_w >= 1 required");
  if (m_u < 0 || m_b < 0 || m_c < 0 || m_f < 0)
    throw std::invalid_argument("negative polynomial degree");
  const int need_v = std::max(
      {m_w + std::max({m_c, 1, m_b - 1}), m_u + std::max(m_c, 1), m_f});
  if (m_v < need_v)
    throw std::invalid_argument("m_v too small for the data degrees");
  if (m_v < std::max(m_u, m_w) + 1)
    throw std::invalid_argument("m_v must exceed max(m_u, m_w)");
  if (subgrid_depth < 0) throw std::invalid_argument("subgrid_depth >= 0");
  if (!(theta > 0.0 && theta <= 1.0))
    throw std::invalid_argument("theta must lie in (0,1]");
  if (!(beta > 0.0 && beta < 0.25))
    throw std::invalid_argument("beta must lie in (0,1/4)");
  if (refine_depth < 1 || downwind_depth < 1)
    throw std::invalid_argument("refinement depths >= 1");
  if (marking_regime && m_w > m_u + 1)
    throw std::invalid_argument("marking regime needs m_w <= m_u + 1");
}

int DiscretizationConfig::quad_order() const {
  const int data = std::max({m_b, m_c, m_f});
  int order = 2 * m_v + data + 1;
  order = std::max(order, 2 * (m_w + std::max(m_b, 1)) + 2);
  order = std::max(order, 2 * (m_u + m_c) + 2);
  order = std::max(order, 2 * m_f + 2);
  return order + 4;
}

int poly_space_dim(int dim, int degree) {
  return dim == 1 ? degree + 1 : (degree + 1) * (degree + 2) / 2;
}

std::vector<Poly> orthonormal_cell_basis(const SimplicialMesh& mesh, int cell,
                                         int degree) {
  const int dim = mesh.dim;
  const Vec2 c = mesh.cell_centroid(cell);
  const double h = mesh.cell_diameter(cell);
  // scaled-centered monomials for conditioning
  const Poly X = (Poly::var(dim, 0) - Poly::constant(dim, c.x)) * (1.0 / h);
  const Poly Y = dim == 2 ? (Poly::var(dim, 1) - Poly::constant(dim, c.y)) *
                                (1.0 / h)
                          : Poly(dim);
  std::vector<Poly> mono;
  for (int d = 0; d <= degree; ++d)
    for (int i = d; i >= 0; --i) {
      const int j = d - i;
      if (dim == 1 && j > 0) continue;
      Poly p = Poly::constant(dim, 1.0);
      for (int k = 0; k < i; ++k) p = p * X;
      for (int k = 0; k < j; ++k) p = p * Y;
      mono.push_back(p);
    }
  const int n = static_cast<int>(mono.size());
  const QuadRule q = cell_rule(dim, mesh.cell_vertices(cell), 2 * degree + 2);
  // two orthonormalization sweeps keep the Gram at identity to machine
  // precision even for the worse-conditioned 2D monomial sets
  std::vector<Poly> basis = mono;
  for (int sweep = 0; sweep < 2; ++sweep) {
    Eigen::MatrixXd gram(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j) {
        const double v = q.integrate_product(basis[i], basis[j]);
        gram(i, j) = v;
        gram(j, i) = v;
      }
    const Eigen::LLT<Eigen::MatrixXd> llt(gram);
    if (llt.info() != Eigen::Success)
      throw std::runtime_error("cell basis Gram not SPD");
    const Eigen::MatrixXd Linv =
        llt.matrixL().solve(Eigen::MatrixXd::Identity(n, n));
    std::vector<Poly> next(n, Poly(dim));
    for (int k = 0; k < n; ++k) {
      Poly p(dim);
      for (int i = 0; i <= k; ++i) {
        const double w = Linv(k, i);
        if (w != 0.0) p += basis[i] * w;
      }
      p.trim();
      next[k] = p;
    }
    basis = std::move(next);
  }
  return basis;
}

TransportProblem TransportProblem::constant_coefficients(
    SimplicialMesh root_mesh, const Vec2& b, double c, const Poly& f) {
  TransportProblem pr;
  pr.dim = root_mesh.dim;
  pr.root = std::move(root_mesh);
  const int n = static_cast<int>(pr.root.cells.size());
  pr.b_constant = true;
  pr.b0 = b;
  pr.b_cells.assign(
      n, {Poly::constant(pr.dim, b.x), Poly::constant(pr.dim, b.y)});
  pr.c_constant_per_cell = true;
  pr.c_values.assign(n, c);
  pr.c_cells.assign(n, Poly::constant(pr.dim, c));
  pr.f_kind = SourceKind::PerRootPoly;
  pr.f_cells.assign(n, f);
  return pr;
}

Vec2 TransportProblem::b_at(const Vec2& p) const {
  if (b_constant) return b0;
  const int c = root.locate(p);
  if (c < 0) throw std::runtime_error("b_at: point outside domain");
  return {b_cells[c][0].at(p), b_cells[c][1].at(p)};
}

double TransportProblem::c_at(const Vec2& p) const {
  const int c = root.locate(p);
  if (c < 0) throw std::runtime_error("c_at: point outside domain");
  return c_cells[c].at(p);
}

double TransportProblem::f_at(const Vec2& p) const {
  switch (f_kind) {
    case SourceKind::PerRootPoly: {
      const int c = root.locate(p);
      if (c < 0) throw std::runtime_error("f_at: point outside domain");
      return f_cells[c].at(p);
    }
    case SourceKind::Piecewise1D: {
      for (const auto& pc : f_pieces)
        if (p.x >= pc.lo - 1e-14 && p.x <= pc.hi + 1e-14) return pc.p(p.x);
      throw std::runtime_error("f_at: point outside piece cover");
    }
    case SourceKind::Pointwise:
      return f_fn(p);
  }
  return 0.0;
}

double TransportProblem::b_scale() const {
  if (b_constant) return norm(b0);
  double s = 0.0;
  for (int c : root.leaves) {
    const QuadRule q = cell_rule(dim, root.cell_vertices(c), 6);
    for (const auto& p : q.pts) s = std::max(s, norm(b_at(p)));
  }
  return s;
}

double TransportProblem::b_min_abs() const {
  if (b_constant) return norm(b0);
  double s = 1e300;
  for (int c : root.leaves) {
    const QuadRule q = cell_rule(dim, root.cell_vertices(c), 6);
    for (const auto& p : q.pts) s = std::min(s, norm(b_at(p)));
  }
  return s;
}

int TransportProblem::root_cell_of(const SimplicialMesh& mesh,
                                   int cell) const {
  return mesh.root_of(cell);
}

const std::array<Poly, 2>& TransportProblem::b_poly(int root_cell) const {
  return b_cells.at(root_cell);
}

Poly TransportProblem::c_poly(int root_cell) const {
  return c_cells.at(root_cell);
}

double TransportProblem::integrate_f_against(const SimplicialMesh& mesh,
                                             int cell, const Poly& v,
                                             int quad_order) const {
  switch (f_kind) {
    case SourceKind::PerRootPoly: {
      const int rc = mesh.root_of(cell);
      const QuadRule q =
          cell_rule(mesh.dim, mesh.cell_vertices(cell), quad_order);
      return q.integrate(f_cells[rc] * v);
    }
    case SourceKind::Piecewise1D: {
      const auto vv = mesh.cell_vertices(cell);
      const double a = std::min(vv[0].x, vv[1].x);
      const double b = std::max(vv[0].x, vv[1].x);
      double s = 0.0;
      for (const auto& pc : f_pieces) {
        const double lo = std::max(a, pc.lo), hi = std::min(b, pc.hi);
        if (hi <= lo) continue;
        s += (pc.p * v).integrate_interval(lo, hi);
      }
      return s;
    }
    case SourceKind::Pointwise: {
      const QuadRule q =
          cell_rule(mesh.dim, mesh.cell_vertices(cell), quad_order + 6);
      return q.sum([&](const Vec2& p) { return f_fn(p) * v.at(p); });
    }
  }
  return 0.0;
}

double TransportProblem::f_l2_sq(const SimplicialMesh& mesh,
                                 int quad_order) const {
  double s = 0.0;
  for (int c : mesh.leaves) {
    switch (f_kind) {
      case SourceKind::PerRootPoly: {
        const int rc = mesh.root_of(c);
        const QuadRule q =
            cell_rule(mesh.dim, mesh.cell_vertices(c), quad_order);
        s += q.integrate(f_cells[rc] * f_cells[rc]);
        break;
      }
      case SourceKind::Piecewise1D: {
        const auto vv = mesh.cell_vertices(c);
        const double a = std::min(vv[0].x, vv[1].x);
        const double b = std::max(vv[0].x, vv[1].x);
        for (const auto& pc : f_pieces) {
          const double lo = std::max(a, pc.lo), hi = std::min(b, pc.hi);
          if (hi <= lo) continue;
          s += (pc.p * pc.p).integrate_interval(lo, hi);
        }
        break;
      }
      case SourceKind::Pointwise: {
        const QuadRule q =
            cell_rule(mesh.dim, mesh.cell_vertices(c), quad_order + 6);
        s += q.sum([&](const Vec2& p) { const double fv = f_fn(p); return fv * fv; });
        break;
      }
    }
  }
  return s;
}

std::function<Vec2(const Vec2&)> TransportProblem::convection_fn() const {
  if (b_constant) {
    const Vec2 b = b0;
    return [b](const Vec2&) { return b; };
  }
  return [this](const Vec2& p) { return b_at(p); };
}

// ---------------------------------------------------------------------------

namespace {

// L2 projection of a source onto P_degree on one coarse cell
Poly project_f_on_cell(const TransportProblem& pr, const SimplicialMesh& mesh,
                       int cell, int degree, int quad_order) {
  const auto basis = orthonormal_cell_basis(mesh, cell, degree);
  Poly out(mesh.dim);
  for (const auto& phi : basis) {
    const double coef = pr.integrate_f_against(mesh, cell, phi, quad_order);
    out += phi * coef;
  }
  out.trim();
  return out;
}

Poly project_poly_on_cell(const SimplicialMesh& mesh, int cell,
                          const Poly& src, int degree, int quad_order) {
  if (src.total_degree() <= degree) return src;
  const auto basis = orthonormal_cell_basis(mesh, cell, degree);
  const QuadRule q = cell_rule(mesh.dim, mesh.cell_vertices(cell), quad_order);
  Poly out(mesh.dim);
  for (const auto& phi : basis) out += phi * q.integrate(src * phi);
  out.trim();
  return out;
}

std::vector<Vec2> sample_grid(const SimplicialMesh& mesh, int cell) {
  std::vector<Vec2> pts;
  const auto vv = mesh.cell_vertices(cell);
  if (mesh.dim == 1) {
    for (int i = 0; i <= 12; ++i)
      pts.push_back(vv[0] + (vv[1] - vv[0]) * (i / 12.0));
  } else {
    const int n = 14;  // ~120 points
    for (int i = 0; i <= n; ++i)
      for (int j = 0; i + j <= n; ++j) {
        const double l1 = static_cast<double>(i) / n;
        const double l2 = static_cast<double>(j) / n;
        pts.push_back(vv[0] + (vv[1] - vv[0]) * l1 + (vv[2] - vv[0]) * l2);
      }
  }
  return pts;
}

}  // namespace

PerturbedData project_data(const TransportProblem& problem,
                           const SubgridPair& pair,
                           const DiscretizationConfig& cfg) {
  const SimplicialMesh& coarse = pair.coarse;
  const int order = cfg.quad_order();
  PerturbedData data;
  const int nc = coarse.n_leaves();
  data.btilde.resize(nc);
  data.ctilde.resize(nc);
  data.ftilde.resize(nc);
  for (int ci = 0; ci < nc; ++ci) {
    const int cell = coarse.leaves[ci];
    const int rc = coarse.root_of(cell);
    for (int k = 0; k < 2; ++k)
      data.btilde[ci][k] = project_poly_on_cell(coarse, cell,
                                                problem.b_poly(rc)[k],
                                                cfg.m_b, order);
    data.ctilde[ci] = project_poly_on_cell(coarse, cell, problem.c_poly(rc),
                                           cfg.m_c, order);
    if (problem.f_kind == TransportProblem::SourceKind::PerRootPoly &&
        problem.f_cells[rc].total_degree() <= cfg.m_f) {
      data.ftilde[ci] = problem.f_cells[rc];
    } else {
      data.ftilde[ci] = project_f_on_cell(problem, coarse, cell, cfg.m_f,
                                          order);
    }
  }
  const SimplicialMesh& fine = pair.fine;
  const int nf = fine.n_leaves();
  data.b_avg.resize(nf);
  data.div_avg.resize(nf);
  for (int fi = 0; fi < nf; ++fi) {
    const int fc = fine.leaves[fi];
    const int ci = pair.fine_to_coarse[fi];
    const QuadRule q = cell_rule(fine.dim, fine.cell_vertices(fc), order);
    const double vol = fine.cell_measure(fc);
    const auto& bt = data.btilde[ci];
    const Poly divb = bt[0].derivative(0) +
                      (fine.dim == 2 ? bt[1].derivative(1) : Poly(fine.dim));
    data.b_avg[fi] = {q.integrate(bt[0]) / vol,
                      fine.dim == 2 ? q.integrate(bt[1]) / vol : 0.0};
    data.div_avg[fi] = q.integrate(divb) / vol;
  }
  return data;
}

double data_oscillation(const TransportProblem& problem,
                        const PerturbedData& data, const SubgridPair& pair,
                        const DiscretizationConfig& cfg) {
  const SimplicialMesh& coarse = pair.coarse;
  const int order = cfg.quad_order();
  double f_err_sq = 0.0;
  double c_sup = 0.0, b_sup_scaled = 0.0;
  for (int ci = 0; ci < coarse.n_leaves(); ++ci) {
    const int cell = coarse.leaves[ci];
    const int rc = coarse.root_of(cell);
    // || f - ftilde ||_{L2}^2: expand f^2 - 2 f ftilde + ftilde^2 so the
    // non-mesh-aligned pieces of f are still integrated exactly
    const QuadRule q = cell_rule(coarse.dim, coarse.cell_vertices(cell),
                                 order);
    double cell_f = 0.0;
    if (problem.f_kind == TransportProblem::SourceKind::Pointwise) {
      cell_f = q.sum([&](const Vec2& p) {
        const double d = problem.f_at(p) - data.ftilde[ci].at(p);
        return d * d;
      });
    } else {
      double f2 = 0.0;
      if (problem.f_kind == TransportProblem::SourceKind::PerRootPoly) {
        f2 = q.integrate(problem.f_cells[rc] * problem.f_cells[rc]);
      } else {
        const auto vv = coarse.cell_vertices(cell);
        const double a = std::min(vv[0].x, vv[1].x);
        const double b = std::max(vv[0].x, vv[1].x);
        for (const auto& pc : problem.f_pieces) {
          const double lo = std::max(a, pc.lo), hi = std::min(b, pc.hi);
          if (hi <= lo) continue;
          f2 += (pc.p * pc.p).integrate_interval(lo, hi);
        }
      }
      const double cross = problem.integrate_f_against(coarse, cell,
                                                       data.ftilde[ci], order);
      const double t2 = q.integrate(data.ftilde[ci] * data.ftilde[ci]);
      cell_f = std::max(0.0, f2 - 2.0 * cross + t2);
    }
    f_err_sq += cell_f;

    // sup-norm estimates on a dense sample grid
    const auto pts = sample_grid(coarse, cell);
    const int root_cell = rc;
    double cdiff = 0.0, bdiff = 0.0;
    for (const auto& p : pts) {
      cdiff = std::max(cdiff, std::abs(problem.c_poly(root_cell).at(p) -
                                       data.ctilde[ci].at(p)));
      const Vec2 bb{problem.b_poly(root_cell)[0].at(p),
                    problem.b_poly(root_cell)[1].at(p)};
      const Vec2 bt{data.btilde[ci][0].at(p), data.btilde[ci][1].at(p)};
      bdiff = std::max(bdiff, norm(bb - bt));
    }
    c_sup = std::max(c_sup, cdiff);
    b_sup_scaled = std::max(
        b_sup_scaled, bdiff / coarse.cell_diameter(cell));
  }
  const double f_norm = std::sqrt(problem.f_l2_sq(coarse, order));
  return std::max(std::sqrt(f_err_sq),
                  std::max(c_sup, b_sup_scaled) * f_norm);
}

}  // namespace dpgt
