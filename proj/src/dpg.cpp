#include "dpgt/dpg.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

#include "dpgt/quadrature.hpp"

namespace dpgt {

DpgSystem assemble_system(const TransportProblem& problem,
                          const PerturbedData& data, const TrialSpace& trial,
                          const TestSpace& test, const SubgridPair& pair,
                          const DiscretizationConfig& cfg) {
  if (trial.mesh != &pair.coarse || test.mesh != &pair.fine)
    throw std::invalid_argument("assemble_system: mismatched meshes");
  DpgSystem sys;
  sys.problem = &problem;
  sys.data = &data;
  sys.trial = &trial;
  sys.test = &test;
  sys.pair = &pair;
  sys.cfg = cfg;

  const SimplicialMesh& fine = pair.fine;
  const int order = cfg.quad_order();
  sys.fine_faces =
      classify_faces(fine, problem.convection_fn(), problem.b_scale());

  const int nv = test.dim();
  const int nu = trial.dim();
  std::vector<Eigen::Triplet<double>> btr;
  sys.F = Eigen::VectorXd::Zero(nv);

  for (int fi = 0; fi < fine.n_leaves(); ++fi) {
    const int cell = fine.leaves[fi];
    const int ci = pair.fine_to_coarse[fi];
    const auto& bt = data.btilde[ci];
    const Poly& ct = data.ctilde[ci];
    const Poly divb = bt[0].derivative(0) +
                      (fine.dim == 2 ? bt[1].derivative(1) : Poly(fine.dim));
    const QuadRule q = cell_rule(fine.dim, fine.cell_vertices(cell), order);
    const auto& psi = test.basis[fi];
    const int voff = test.offset(fi);

    // Gram block: <v,z> + <btilde.grad v, btilde.grad z>
    const int nloc = static_cast<int>(psi.size());
    Eigen::MatrixXd gblock(nloc, nloc);
    std::vector<Poly> dpsi(nloc);
    for (int r = 0; r < nloc; ++r) {
      dpsi[r] = bt[0] * psi[r].derivative(0);
      if (fine.dim == 2) dpsi[r] += bt[1] * psi[r].derivative(1);
    }
    for (int r = 0; r < nloc; ++r)
      for (int s = r; s < nloc; ++s) {
        const double v =
            q.integrate(psi[r] * psi[s]) + q.integrate(dpsi[r] * dpsi[s]);
        gblock(r, s) = v;
        gblock(s, r) = v;
      }
    sys.G.add_block(gblock);

    // volume terms against the u-block:  (ctilde v - btilde.grad v - v div
    // btilde) u
    const int uoff = trial.u_offset(ci);
    for (int r = 0; r < nloc; ++r) {
      const Poly weight = ct * psi[r] - dpsi[r] - psi[r] * divb;
      for (int j = 0; j < trial.u_loc_dim; ++j) {
        const double v = q.integrate(weight * trial.u_basis[ci][j]);
        if (v != 0.0) btr.emplace_back(voff + r, uoff + j, v);
      }
      sys.F[voff + r] = q.integrate(data.ftilde[ci] * psi[r]);
    }

    // skeleton terms against the w-block:  v (btilde.n) w over the
    // non-characteristic part of the cell boundary
    for (int f = 0; f <= fine.dim; ++f) {
      if (sys.fine_faces.at(fi, f) == FaceKind::Characteristic) continue;
      const Vec2 n = fine.face_outward_normal(cell, f);
      const auto& cn = trial.cell_nodes[ci];
      if (fine.dim == 1) {
        const Vec2 p = fine.face_midpoint(cell, f);
        const double bn = bt[0].at(p) * n.x;
        for (int r = 0; r < nloc; ++r) {
          const double vr = psi[r].at(p) * bn;
          for (size_t a = 0; a < cn.size(); ++a) {
            const int gi = trial.w_index(cn[a]);
            if (gi < 0) continue;
            const double v = vr * trial.w_shape[ci][a].at(p);
            if (v != 0.0) btr.emplace_back(voff + r, gi, v);
          }
        }
      } else {
        const auto fv = fine.face_vertices(cell, f);
        const QuadRule fq =
            segment_rule(fine.vertices[fv[0]], fine.vertices[fv[1]], order);
        for (int r = 0; r < nloc; ++r) {
          for (size_t a = 0; a < cn.size(); ++a) {
            const int gi = trial.w_index(cn[a]);
            if (gi < 0) continue;
            double v = 0.0;
            for (size_t iq = 0; iq < fq.pts.size(); ++iq) {
              const Vec2& p = fq.pts[iq];
              const double bn = bt[0].at(p) * n.x + bt[1].at(p) * n.y;
              v += fq.w[iq] * psi[r].at(p) * bn *
                   trial.w_shape[ci][a].at(p);
            }
            if (v != 0.0) btr.emplace_back(voff + r, gi, v);
          }
        }
      }
    }
  }

  sys.B.resize(nv, nu);
  sys.B.setFromTriplets(btr.begin(), btr.end());
  sys.G.factor();
  sys.S = normal_matrix(sys.B, sys.G);
  sys.rhs = sys.B.transpose() * sys.G.solve(sys.F);
  return sys;
}

TrialFunction solve_pg(const DpgSystem& sys) {
  TrialFunction fn(*sys.trial);
  fn.coeffs = solve_spd(sys.S, sys.rhs, sys.cfg.cg_tol, sys.cfg.dense_limit);
  return fn;
}

LiftedResidual project_residual(const DpgSystem& sys,
                                const Eigen::VectorXd& x) {
  if (x.size() != sys.trial->dim())
    throw std::invalid_argument("project_residual: coefficient length");
  LiftedResidual rl;
  rl.kind = LiftedResidual::Kind::Projected;
  const Eigen::VectorXd resid = sys.B * x - sys.F;
  const int nf = sys.pair->fine.n_leaves();
  rl.cell_coeffs.resize(nf);
  rl.cell_norm_sq.resize(nf);
  rl.coarse_norm_sq.assign(sys.pair->coarse.n_leaves(), 0.0);
  rl.total_norm_sq = 0.0;
  for (int fi = 0; fi < nf; ++fi) {
    const int o = sys.G.block_offset(fi);
    const int s = sys.G.block_size(fi);
    const Eigen::VectorXd local = resid.segment(o, s);
    rl.cell_coeffs[fi] = sys.G.solve_block(fi, local);
    rl.cell_norm_sq[fi] = rl.cell_coeffs[fi].dot(local);
    rl.coarse_norm_sq[sys.pair->fine_to_coarse[fi]] += rl.cell_norm_sq[fi];
    rl.total_norm_sq += rl.cell_norm_sq[fi];
  }
  return rl;
}

Eigen::VectorXd trial_to_test(const DpgSystem& sys, const Eigen::VectorXd& x) {
  return sys.G.solve(sys.B * x);
}

double test_norm_sq(const DpgSystem& sys, const Eigen::VectorXd& v) {
  return v.dot(sys.G.apply(v));
}

SpMat trial_norm_gram(const DpgSystem& sys) {
  const TrialSpace& trial = *sys.trial;
  const SimplicialMesh& coarse = sys.pair->coarse;
  const int order = sys.cfg.quad_order();
  std::vector<Eigen::Triplet<double>> tr;
  // u-block: orthonormal per cell
  for (int i = 0; i < trial.dim_u; ++i) tr.emplace_back(i, i, 1.0);
  for (int ci = 0; ci < coarse.n_leaves(); ++ci) {
    const int cell = coarse.leaves[ci];
    const QuadRule q = cell_rule(coarse.dim, coarse.cell_vertices(cell),
                                 order);
    const auto& bt = sys.data->btilde[ci];
    const auto& cn = trial.cell_nodes[ci];
    for (size_t a = 0; a < cn.size(); ++a) {
      const int ga = trial.w_index(cn[a]);
      if (ga < 0) continue;
      Poly da = bt[0] * trial.w_shape[ci][a].derivative(0);
      if (coarse.dim == 2) da += bt[1] * trial.w_shape[ci][a].derivative(1);
      for (size_t b = a; b < cn.size(); ++b) {
        const int gb = trial.w_index(cn[b]);
        if (gb < 0) continue;
        Poly db = bt[0] * trial.w_shape[ci][b].derivative(0);
        if (coarse.dim == 2) db += bt[1] * trial.w_shape[ci][b].derivative(1);
        const double v = q.integrate(trial.w_shape[ci][a] *
                                     trial.w_shape[ci][b]) +
                         q.integrate(da * db);
        tr.emplace_back(ga, gb, v);
        if (ga != gb) tr.emplace_back(gb, ga, v);
      }
    }
  }
  SpMat m(trial.dim(), trial.dim());
  m.setFromTriplets(tr.begin(), tr.end());
  return m;
}

double trial_norm_sq(const DpgSystem& sys, const Eigen::VectorXd& x) {
  const SpMat m = trial_norm_gram(sys);
  return x.dot(m * x);
}

InfsupEstimate estimate_discrete_infsup(const DpgSystem& sys, unsigned seed) {
  const SpMat m = trial_norm_gram(sys);
  const int n = static_cast<int>(m.rows());
  const Eigen::MatrixXd sd(sys.S);
  const Eigen::LDLT<Eigen::MatrixXd> sf(sd);
  if (sf.info() != Eigen::Success)
    throw std::runtime_error("estimate_discrete_infsup: S factorization");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist;
  Eigen::VectorXd x(n);
  for (int i = 0; i < n; ++i) x[i] = dist(rng);
  InfsupEstimate est;
  double lambda_prev = -1.0;
  for (int it = 0; it < 2000; ++it) {
    Eigen::VectorXd y = m * x;
    Eigen::VectorXd z = sf.solve(y);
    const double mn = std::sqrt(z.dot(m * z));
    if (!(mn > 0.0))
      throw std::runtime_error("estimate_discrete_infsup: degenerate iterate");
    x = z / mn;
    const double num = x.dot(sd * x);
    const double den = x.dot(m * x);
    const double lambda = num / den;
    est.iterations = it + 1;
    if (lambda_prev > 0.0 &&
        std::abs(lambda - lambda_prev) <= 1e-10 * lambda) {
      est.gamma = std::sqrt(std::max(lambda, 0.0));
      est.converged = true;
      return est;
    }
    lambda_prev = lambda;
  }
  est.gamma = std::sqrt(std::max(lambda_prev, 0.0));
  est.converged = false;
  return est;
}

double broken_form_cell(const DpgSystem& sys, const TrialFunction& fn,
                        int fine_leaf, const Poly& v) {
  const SimplicialMesh& fine = sys.pair->fine;
  const int cell = fine.leaves[fine_leaf];
  const int ci = sys.pair->fine_to_coarse[fine_leaf];
  const auto& bt = sys.data->btilde[ci];
  const Poly& ct = sys.data->ctilde[ci];
  const Poly divb = bt[0].derivative(0) +
                    (fine.dim == 2 ? bt[1].derivative(1) : Poly(fine.dim));
  const Poly u = fn.u_poly(ci);
  const Poly w = fn.w_poly(ci);
  const Poly vx = v.derivative(0), vy = v.derivative(1);
  const QuadRule q =
      cell_rule(fine.dim, fine.cell_vertices(cell), sys.cfg.quad_order());
  double s = q.sum([&](const Vec2& p) {
    const double bdv = bt[0].at(p) * vx.at(p) +
                       (fine.dim == 2 ? bt[1].at(p) * vy.at(p) : 0.0);
    return (ct.at(p) * v.at(p) - bdv - v.at(p) * divb.at(p)) * u.at(p);
  });
  for (int f = 0; f <= fine.dim; ++f) {
    if (sys.fine_faces.at(fine_leaf, f) == FaceKind::Characteristic) continue;
    const Vec2 n = fine.face_outward_normal(cell, f);
    if (fine.dim == 1) {
      const Vec2 p = fine.face_midpoint(cell, f);
      s += bt[0].at(p) * n.x * v.at(p) * w.at(p);
    } else {
      const auto fv = fine.face_vertices(cell, f);
      const QuadRule fq = segment_rule(fine.vertices[fv[0]],
                                       fine.vertices[fv[1]],
                                       sys.cfg.quad_order());
      s += fq.sum([&](const Vec2& p) {
        const double bn = bt[0].at(p) * n.x + bt[1].at(p) * n.y;
        return bn * v.at(p) * w.at(p);
      });
    }
  }
  return s;
}

ExactError exact_error(const DpgSystem& sys, const TrialFunction& fn) {
  if (!sys.problem->has_exact())
    throw std::runtime_error("exact_error: no exact solution configured");
  const SimplicialMesh& coarse = sys.pair->coarse;
  const int order = sys.cfg.quad_order() + 6;
  ExactError e;
  double ul2 = 0.0, wl2 = 0.0, wb = 0.0;
  for (int ci = 0; ci < coarse.n_leaves(); ++ci) {
    const int cell = coarse.leaves[ci];
    const QuadRule q = cell_rule(coarse.dim, coarse.cell_vertices(cell),
                                 order);
    const Poly u = fn.u_poly(ci);
    const Poly w = fn.w_poly(ci);
    const auto& bt = sys.data->btilde[ci];
    Poly bw = bt[0] * w.derivative(0);
    if (coarse.dim == 2) bw += bt[1] * w.derivative(1);
    ul2 += q.sum([&](const Vec2& p) {
      const double d = sys.problem->u_exact(p) - u.at(p);
      return d * d;
    });
    wl2 += q.sum([&](const Vec2& p) {
      const double d = sys.problem->u_exact(p) - w.at(p);
      return d * d;
    });
    wb += q.sum([&](const Vec2& p) {
      const double d = sys.problem->b_grad_u_exact(p) - bw.at(p);
      return d * d;
    });
  }
  e.u_l2 = std::sqrt(ul2);
  e.w_hb = std::sqrt(wl2 + wb);
  return e;
}

}  // namespace dpgt
