#include "dpgt/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "dpgt/quadrature.hpp"

namespace dpgt {

namespace {

std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double piece_l2_sq(const ResidualFields::CellField& cf, int dim,
                   const std::vector<Vec2>& verts) {
  double s = 0.0;
  for (const auto& [iv, p] : cf.g) {
    if (dim == 1) {
      s += (p * p).integrate_interval(iv[0], iv[1]);
    } else {
      const QuadRule q =
          triangle_rule(verts[0], verts[1], verts[2],
                        2 * p.total_degree() + 2);
      s += q.integrate(p * p);
    }
  }
  return s;
}

}  // namespace

ResidualFields residual_fields(const TransportProblem& problem,
                               const TrialFunction& fn,
                               const DiscretizationConfig& cfg) {
  const TrialSpace& space = *fn.space;
  const SimplicialMesh& mesh = *space.mesh;
  if (!problem.b_constant)
    throw std::invalid_argument(
        "residual_fields: marking machinery needs constant convection");
  ResidualFields rf;
  rf.mesh = &mesh;
  rf.b = problem.b0;
  rf.cells.resize(mesh.n_leaves());
  const int order = cfg.quad_order();
  for (int ci = 0; ci < mesh.n_leaves(); ++ci) {
    const int cell = mesh.leaves[ci];
    const int rc = mesh.root_of(cell);
    if (!problem.c_constant_per_cell)
      throw std::invalid_argument(
          "residual_fields: reaction must be constant per cell");
    auto& cf = rf.cells[ci];
    cf.c = problem.c_values[rc];
    const Poly u = fn.u_poly(ci);
    const Poly w = fn.w_poly(ci);
    cf.e = u - w;
    Poly bw = problem.b_poly(rc)[0] * w.derivative(0);
    if (mesh.dim == 2) bw += problem.b_poly(rc)[1] * w.derivative(1);
    const Poly head = bw + u * cf.c;  // b.grad w + c u
    const auto verts = mesh.cell_vertices(cell);
    if (problem.f_kind == TransportProblem::SourceKind::Piecewise1D) {
      const double a = std::min(verts[0].x, verts[1].x);
      const double b = std::max(verts[0].x, verts[1].x);
      for (const auto& pc : problem.f_pieces) {
        const double lo = std::max(a, pc.lo), hi = std::min(b, pc.hi);
        if (hi <= lo) continue;
        cf.g.push_back({{lo, hi}, head - pc.p});
      }
    } else if (problem.f_kind == TransportProblem::SourceKind::PerRootPoly) {
      if (mesh.dim == 1) {
        const double a = std::min(verts[0].x, verts[1].x);
        const double b = std::max(verts[0].x, verts[1].x);
        cf.g.push_back({{a, b}, head - problem.f_cells[rc]});
      } else {
        cf.g.push_back({{0.0, 0.0}, head - problem.f_cells[rc]});
      }
    } else {
      throw std::invalid_argument(
          "residual_fields: pointwise sources are not supported here");
    }
    // norms
    cf.g_norm2 = piece_l2_sq(cf, mesh.dim, verts);
    if (mesh.dim == 1) {
      const double a = std::min(verts[0].x, verts[1].x);
      const double b = std::max(verts[0].x, verts[1].x);
      cf.e_norm2 = (cf.e * cf.e).integrate_interval(a, b);
      double s = 0.0;
      for (const auto& [iv, p] : cf.g) {
        const Poly q = cf.e + p * cf.c;
        s += (q * q).integrate_interval(iv[0], iv[1]);
      }
      cf.ecg_norm2 = s;
    } else {
      const QuadRule q = cell_rule(2, verts, order);
      cf.e_norm2 = q.integrate(cf.e * cf.e);
      const Poly ecg = cf.e + cf.g[0].second * cf.c;
      cf.ecg_norm2 = q.integrate(ecg * ecg);
    }
  }
  return rf;
}

LineAverages line_average_field(const ResidualFields& fields,
                                const SimplicialMesh& coarse) {
  LineAverages la;
  la.cells.resize(coarse.n_leaves());
  for (int ci = 0; ci < coarse.n_leaves(); ++ci) {
    const int cell = coarse.leaves[ci];
    const auto verts = coarse.cell_vertices(cell);
    auto& cg = la.cells[ci];
    const auto& cf = fields.cells[ci];
    if (coarse.dim == 1) {
      cg.one_d = true;
      const double a = std::min(verts[0].x, verts[1].x);
      const double b = std::max(verts[0].x, verts[1].x);
      const double h = b - a;
      double integral = 0.0;
      for (const auto& [iv, p] : cf.g)
        integral += p.integrate_interval(iv[0], iv[1]);
      cg.value_1d = integral / h;
      cg.G_norm2 = cg.value_1d * cg.value_1d * h;
      // contraction pieces
      double gmG = 0.0, cross = 0.0;
      for (const auto& [iv, p] : cf.g) {
        const Poly d = p - Poly::constant(1, cg.value_1d);
        gmG += (d * d).integrate_interval(iv[0], iv[1]);
        cross += (d * cg.value_1d).integrate_interval(iv[0], iv[1]);
      }
      cg.g_minus_G_norm2 = gmG;
      cg.cross_g_minus_G_G = cross;
    } else {
      cg.one_d = false;
      cg.frame = build_frame(2, verts, fields.b);
      const Poly gf = cg.frame.to_frame_poly(cf.g[0].second);
      cg.avg.resize(cg.frame.pieces.size());
      cg.G_norm2 = 0.0;
      for (size_t p = 0; p < cg.frame.pieces.size(); ++p) {
        const auto& sm = cg.frame.xminus[p];
        const auto& sp = cg.frame.xplus[p];
        cg.avg[p] = gf.char_average_x(sm.a, sm.b, sp.a, sp.b);
        // ||G||^2 over the piece: int A(y)^2 r(y) dy
        Poly ry(2);
        ry.set_coeff(0, 1, sp.a - sm.a);
        ry.set_coeff(0, 0, sp.b - sm.b);
        const Poly integrand = cg.avg[p] * cg.avg[p] * ry;
        const QuadRule q = interval_rule(
            sm.y0, sm.y1, std::max(40, integrand.total_degree() + 2));
        for (size_t i = 0; i < q.pts.size(); ++i)
          cg.G_norm2 += q.w[i] * integrand(0.0, q.pts[i].x);
      }
      // independent 2D quadrature for the orthogonality diagnostics
      const QuadRule q2 =
          cell_rule(2, verts, std::max(32, 2 * gf.total_degree() + 4));
      double gmG = 0.0, cross = 0.0;
      for (size_t i = 0; i < q2.pts.size(); ++i) {
        const Vec2 fp = cg.frame.to_frame(q2.pts[i]);
        const double A = cg.avg[cg.frame.piece_of(fp.y)](0.0, fp.y);
        const double gv = gf.at(fp);
        gmG += q2.w[i] * (gv - A) * (gv - A);
        cross += q2.w[i] * (gv - A) * A;
      }
      cg.g_minus_G_norm2 = gmG;
      cg.cross_g_minus_G_G = cross;
    }
  }
  return la;
}

double LineAverages::CellG::eval(const Vec2& phys) const {
  if (one_d) return value_1d;
  const Vec2 fp = frame.to_frame(phys);
  return avg[frame.piece_of(fp.y)](0.0, fp.y);
}

IndicatorReport make_report(const ResidualFields& fields,
                            const LineAverages& averages,
                            const LiftedResidual* rdelta, double osc,
                            double beta) {
  IndicatorReport rep;
  const size_t n = fields.cells.size();
  rep.cells.resize(n);
  rep.osc = osc;
  for (size_t i = 0; i < n; ++i) {
    auto& c = rep.cells[i];
    const auto& cf = fields.cells[i];
    c.e_norm2 = cf.e_norm2;
    c.g_norm2 = cf.g_norm2;
    c.ecg_norm2 = cf.ecg_norm2;
    c.eta2 = cf.e_norm2 + cf.g_norm2;
    c.G_norm2 = averages.cells[i].G_norm2;
    c.alpha = cf.g_norm2 > 0.0 ? std::sqrt(c.G_norm2 / cf.g_norm2) : 0.0;
    c.omega = cf.g_norm2 > 0.0
                  ? std::sqrt(cf.e_norm2 / cf.g_norm2)
                  : std::numeric_limits<double>::infinity();
    // zero-indicator cells are vacuously reducible and never marked
    const double denom = cf.g_norm2 + cf.e_norm2;
    c.type = (denom <= 0.0 || cf.ecg_norm2 >= beta * denom) ? 1 : 2;
    if (rdelta) c.rdelta2 = rdelta->coarse_norm_sq[i];
    rep.eta2_total += c.eta2;
    rep.rdelta2_total += c.rdelta2;
  }
  return rep;
}

std::string IndicatorReport::csv(const SimplicialMesh& coarse) const {
  std::ostringstream os;
  os << "cell_id,eta2,Rdelta2,alpha,omega,type,marked\n";
  for (size_t i = 0; i < cells.size(); ++i) {
    const auto& c = cells[i];
    os << coarse.leaves[i] << "," << fmt17(c.eta2) << ","
       << fmt17(c.rdelta2) << "," << fmt17(c.alpha) << ","
       << fmt17(std::isfinite(c.omega) ? c.omega : -1.0) << "," << c.type
       << "," << (c.marked ? 1 : 0) << "\n";
  }
  return os.str();
}

MarkResult classify_and_mark(IndicatorReport& report,
                             const SimplicialMesh& coarse, double theta,
                             double beta, bool use_rdelta) {
  (void)beta;  // types already assigned in make_report
  const size_t n = report.cells.size();
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  auto q = [&](size_t i) {
    return use_rdelta ? report.cells[i].rdelta2 : report.cells[i].eta2;
  };
  std::stable_sort(order.begin(), order.end(),
                   [&](size_t a, size_t b) { return q(a) > q(b); });
  double total = 0.0;
  for (size_t i = 0; i < n; ++i) total += q(i);
  const double goal = theta * theta * total;
  MarkResult mr;
  double acc = 0.0;
  for (size_t k = 0; k < n && (acc < goal || total == 0.0); ++k) {
    const size_t i = order[k];
    if (q(i) <= 0.0) break;
    acc += q(i);
    report.cells[i].marked = true;
    const int cell = coarse.leaves[i];
    mr.marked.insert(cell);
    if (report.cells[i].type == 1) mr.type1.insert(cell);
    else mr.type2.insert(cell);
  }
  return mr;
}

TrialFunction solve_least_squares(const TransportProblem& problem,
                                  const TrialSpace& trial,
                                  const DiscretizationConfig& cfg) {
  const SimplicialMesh& mesh = *trial.mesh;
  const int order = cfg.quad_order();
  const int n = trial.dim();
  std::vector<Eigen::Triplet<double>> tr;
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
  for (int ci = 0; ci < mesh.n_leaves(); ++ci) {
    const int cell = mesh.leaves[ci];
    const int rc = mesh.root_of(cell);
    const auto& bp = problem.b_poly(rc);
    const Poly cp = problem.c_poly(rc);
    // local dofs: u-basis then free w-nodes
    std::vector<int> gidx;
    std::vector<Poly> first;   // u - w component
    std::vector<Poly> second;  // b.grad w + c u component
    for (int j = 0; j < trial.u_loc_dim; ++j) {
      gidx.push_back(trial.u_offset(ci) + j);
      first.push_back(trial.u_basis[ci][j]);
      second.push_back(cp * trial.u_basis[ci][j]);
    }
    const auto& cn = trial.cell_nodes[ci];
    for (size_t a = 0; a < cn.size(); ++a) {
      const int gi = trial.w_index(cn[a]);
      if (gi < 0) continue;
      gidx.push_back(gi);
      first.push_back(-trial.w_shape[ci][a]);
      Poly bw = bp[0] * trial.w_shape[ci][a].derivative(0);
      if (mesh.dim == 2) bw += bp[1] * trial.w_shape[ci][a].derivative(1);
      second.push_back(bw);
    }
    const QuadRule q = cell_rule(mesh.dim, mesh.cell_vertices(cell), order);
    const size_t m = gidx.size();
    for (size_t i = 0; i < m; ++i) {
      for (size_t j = i; j < m; ++j) {
        const double v = q.integrate(first[i] * first[j]) +
                         q.integrate(second[i] * second[j]);
        tr.emplace_back(gidx[i], gidx[j], v);
        if (i != j) tr.emplace_back(gidx[j], gidx[i], v);
      }
      rhs[gidx[i]] +=
          problem.integrate_f_against(mesh, cell, second[i], order);
    }
  }
  SpMat a(n, n);
  a.setFromTriplets(tr.begin(), tr.end());
  TrialFunction fn(trial);
  fn.coeffs = solve_spd(a, rhs, cfg.cg_tol, cfg.dense_limit);
  return fn;
}

double eta_total_sq(const TransportProblem& problem, const TrialFunction& fn,
                    const DiscretizationConfig& cfg) {
  const ResidualFields rf = residual_fields(problem, fn, cfg);
  double s = 0.0;
  for (const auto& c : rf.cells) s += c.e_norm2 + c.g_norm2;
  return s;
}

UminResult umin_correction(const Poly& e, const Poly& g, double c,
                           const QuadRule& cell_quadrature) {
  UminResult r;
  r.u_min = (e + g * c) * (1.0 / (1.0 + c * c));
  const double ecg = cell_quadrature.integrate((e + g * c) * (e + g * c));
  const double q0 = cell_quadrature.integrate(e * e) +
                    cell_quadrature.integrate(g * g);
  r.reduction = q0 > 0.0 ? 1.0 - ecg / ((1.0 + c * c) * q0) : 1.0;
  return r;
}

Oracle1dZ oracle_1d_z(const std::vector<double>& F_per_leaf,
                      const std::vector<double>& c_per_leaf,
                      const SimplicialMesh& mesh) {
  if (mesh.dim != 1) throw std::invalid_argument("oracle_1d_z: 1D only");
  std::vector<int> order(mesh.n_leaves());
  std::iota(order.begin(), order.end(), 0);
  auto left = [&](int li) {
    const auto vv = mesh.cell_vertices(mesh.leaves[li]);
    return std::min(vv[0].x, vv[1].x);
  };
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return left(a) < left(b); });
  Oracle1dZ z;
  double zcur = 0.0;
  for (int li : order) {
    const auto vv = mesh.cell_vertices(mesh.leaves[li]);
    Oracle1dZ::Cell c;
    c.a = std::min(vv[0].x, vv[1].x);
    c.b = std::max(vv[0].x, vv[1].x);
    c.F = F_per_leaf[li];
    c.c = c_per_leaf[li];
    c.z_a = zcur;
    z.cells.push_back(c);
    zcur = z.eval(c.b);
  }
  double zn = 0.0, dzn = 0.0;
  for (const auto& c : z.cells) {
    const QuadRule q = interval_rule(c.a, c.b, 24);
    for (size_t i = 0; i < q.pts.size(); ++i) {
      const double zv = z.eval(q.pts[i].x);
      const double dz = -c.c * zv + c.F;
      zn += q.w[i] * zv * zv;
      dzn += q.w[i] * dz * dz;
    }
  }
  z.z_norm = std::sqrt(zn);
  z.dz_norm = std::sqrt(dzn);
  return z;
}

double Oracle1dZ::eval(double x) const {
  for (const auto& c : cells) {
    if (x > c.b + 1e-14) continue;
    const double t = std::max(0.0, x - c.a);
    if (c.c != 0.0)
      return c.z_a * std::exp(-c.c * t) +
             (c.F / c.c) * (1.0 - std::exp(-c.c * t));
    return c.z_a + c.F * t;
  }
  return cells.empty() ? 0.0 : eval(cells.back().b);
}

double Oracle1dZ::deriv(double x) const {
  for (const auto& c : cells)
    if (x <= c.b + 1e-14) return -c.c * eval(x) + c.F;
  return 0.0;
}

ZgLift zg_lift(const Poly& g_phys, const LineAverages::CellG& G,
               const CharacteristicFrame& frame) {
  ZgLift z;
  z.frame = &frame;
  z.bnorm = frame.bnorm;
  const Poly gf = frame.to_frame_poly(g_phys);
  const Poly anti = gf.antiderivative_x();
  z.anti_g.assign(frame.pieces.size(), anti);
  if (frame.dim == 1) {
    z.avg.assign(1, Poly::constant(1, G.value_1d));
  } else {
    z.avg = G.avg;
  }
  return z;
}

double ZgLift::eval_frame(const Vec2& q) const {
  const int p = frame->dim == 1 ? 0 : frame->piece_of(q.y);
  const double xm = frame->xminus[p].at(q.y);
  const double a = frame->dim == 1 ? avg[p](0.0)
                                   : avg[p](0.0, q.y);
  const double anti_here = anti_g[p].at(q);
  const double anti_in =
      frame->dim == 1 ? anti_g[p](xm) : anti_g[p](xm, q.y);
  return (anti_here - anti_in - a * (q.x - xm)) / bnorm;
}

ConjectureProbeResult conjecture_probe(
    const TransportProblem& problem, const LineAverages& averages,
    const IndicatorReport& report, const std::set<int>& type2_marked,
    const SimplicialMesh& coarse, const SimplicialMesh& refined,
    const std::set<int>& refined_region_cells,
    const DiscretizationConfig& cfg) {
  ConjectureProbeResult res;
  // ||F||^2 = sum of ||G||^2 over the masked cells
  double f_norm2 = 0.0;
  for (int cell : type2_marked) {
    const int ci = coarse.leaf_index(cell);
    f_norm2 += report.cells[ci].G_norm2;
  }
  res.F_norm = std::sqrt(f_norm2);
  if (!(res.F_norm > 0.0))
    throw std::invalid_argument("conjecture_probe: F vanishes");

  auto F_at = [&](const Vec2& p) -> double {
    // locate the coarse ancestor of the point
    const int cc = coarse.locate(p);
    if (cc < 0 || !type2_marked.count(cc)) return 0.0;
    return averages.cells[coarse.leaf_index(cc)].eval(p);
  };

  // w-space on the refined mesh, vanishing outside the refined region and on
  // the inflow boundary
  const FaceClassification faces = classify_faces(
      refined, problem.convection_fn(), problem.b_scale());
  const TrialSpace ts = build_trial_space(refined, cfg, faces, true);
  std::vector<bool> in_region(refined.n_leaves(), false);
  for (int li = 0; li < refined.n_leaves(); ++li) {
    int cur = refined.leaves[li];
    bool inside = false;
    while (cur >= 0) {
      if (refined_region_cells.count(cur)) {
        inside = true;
        break;
      }
      cur = refined.cells[cur].parent;
    }
    in_region[li] = inside;
  }
  // nodes touching any outside cell are pinned to zero
  std::vector<bool> node_free(ts.nodes.size(), true);
  for (int li = 0; li < refined.n_leaves(); ++li)
    if (!in_region[li])
      for (int gn : ts.cell_nodes[li]) node_free[gn] = false;
  // dof map over free, unconstrained nodes
  std::vector<int> node_sys(ts.nodes.size(), -1);
  int nsys = 0;
  for (size_t i = 0; i < ts.nodes.size(); ++i)
    if (ts.node_dof[i] >= 0 && node_free[i]) node_sys[i] = nsys++;
  res.free_dofs = nsys;
  if (nsys == 0) {
    res.xi = 1.0;
    res.w_over_F = 0.0;
    return res;
  }

  const int order = cfg.quad_order() + 8;
  std::vector<Eigen::Triplet<double>> tr;
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(nsys);
  std::vector<Eigen::Triplet<double>> mass_tr;
  for (int li = 0; li < refined.n_leaves(); ++li) {
    if (!in_region[li]) continue;
    const int cell = refined.leaves[li];
    const int rc = refined.root_of(cell);
    const double c = problem.c_values[rc];
    const auto& cn = ts.cell_nodes[li];
    std::vector<int> loc;
    std::vector<Poly> op;  // b.grad w + c w
    std::vector<Poly> val;
    for (size_t a = 0; a < cn.size(); ++a) {
      if (node_sys[cn[a]] < 0) continue;
      loc.push_back(node_sys[cn[a]]);
      Poly bw = problem.b_poly(rc)[0] * ts.w_shape[li][a].derivative(0);
      if (refined.dim == 2)
        bw += problem.b_poly(rc)[1] * ts.w_shape[li][a].derivative(1);
      op.push_back(bw + ts.w_shape[li][a] * c);
      val.push_back(ts.w_shape[li][a]);
    }
    if (loc.empty()) continue;
    const QuadRule q = cell_rule(refined.dim, refined.cell_vertices(cell),
                                 order);
    for (size_t i = 0; i < loc.size(); ++i) {
      for (size_t j = i; j < loc.size(); ++j) {
        const double v = q.integrate(op[i] * op[j]);
        tr.emplace_back(loc[i], loc[j], v);
        if (i != j) tr.emplace_back(loc[j], loc[i], v);
        const double mv = q.integrate(val[i] * val[j]);
        mass_tr.emplace_back(loc[i], loc[j], mv);
        if (i != j) mass_tr.emplace_back(loc[j], loc[i], mv);
      }
      rhs[loc[i]] += q.sum(
          [&](const Vec2& p) { return F_at(p) * op[i].at(p); });
    }
  }
  SpMat a(nsys, nsys), mm(nsys, nsys);
  a.setFromTriplets(tr.begin(), tr.end());
  mm.setFromTriplets(mass_tr.begin(), mass_tr.end());
  const Eigen::VectorXd w = solve_spd(a, rhs, cfg.cg_tol, cfg.dense_limit);
  const double resid_sq =
      std::max(0.0, f_norm2 - 2.0 * w.dot(rhs) + w.dot(a * w));
  res.xi = std::sqrt(resid_sq) / res.F_norm;
  res.w_over_F = std::sqrt(std::max(0.0, w.dot(mm * w))) / res.F_norm;
  return res;
}

}  // namespace dpgt
