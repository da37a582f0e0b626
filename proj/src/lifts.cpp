#include "dpgt/lifts.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "dpgt/quadrature.hpp"

namespace dpgt {

Vec2 CharacteristicFrame::to_frame(const Vec2& p) const {
  const Vec2 d = p - anchor;
  return {r00 * d.x + r01 * d.y, r10 * d.x + r11 * d.y};
}

Vec2 CharacteristicFrame::from_frame(const Vec2& q) const {
  // R is orthogonal
  return {anchor.x + r00 * q.x + r10 * q.y,
          anchor.y + r01 * q.x + r11 * q.y};
}

Poly CharacteristicFrame::to_frame_poly(const Poly& phys) const {
  if (dim == 1) {
    // x_phys = anchor.x + r00 * xi
    return phys.compose_affine(r00, 0.0, anchor.x, 0.0, 0.0, 0.0);
  }
  return phys.compose_affine(r00, r10, anchor.x, r01, r11, anchor.y);
}

Poly CharacteristicFrame::to_physical_poly(const Poly& framep) const {
  if (dim == 1)
    return framep.compose_affine(r00, 0.0, -r00 * anchor.x, 0.0, 0.0, 0.0);
  return framep.compose_affine(
      r00, r01, -(r00 * anchor.x + r01 * anchor.y),
      r10, r11, -(r10 * anchor.x + r11 * anchor.y));
}

double CharacteristicFrame::r_at(double y) const {
  const int p = piece_of(y);
  return xplus[p].at(y) - xminus[p].at(y);
}

double CharacteristicFrame::xminus_at(double y) const {
  return xminus[piece_of(y)].at(y);
}

int CharacteristicFrame::piece_of(double y) const {
  if (pieces.size() == 1) return 0;
  for (size_t i = 0; i < pieces.size(); ++i)
    if (y <= pieces[i].y1 + 1e-14 * (1.0 + std::abs(pieces[i].y1)))
      return static_cast<int>(i);
  return static_cast<int>(pieces.size()) - 1;
}

namespace {

// x-extent of the horizontal cross-section of a frame triangle
std::pair<double, double> cross_section(const std::vector<Vec2>& fv,
                                        double y, double tol) {
  double lo = 1e300, hi = -1e300;
  for (int e = 0; e < 3; ++e) {
    const Vec2& p = fv[e];
    const Vec2& q = fv[(e + 1) % 3];
    const double dy = q.y - p.y;
    if (std::abs(dy) <= tol) {
      if (std::abs(p.y - y) <= tol) {
        lo = std::min({lo, p.x, q.x});
        hi = std::max({hi, p.x, q.x});
      }
      continue;
    }
    const double t = (y - p.y) / dy;
    if (t < -1e-12 || t > 1.0 + 1e-12) continue;
    const double x = p.x + t * (q.x - p.x);
    lo = std::min(lo, x);
    hi = std::max(hi, x);
  }
  if (lo > hi) throw std::runtime_error("cross_section: empty");
  return {lo, hi};
}

}  // namespace

CharacteristicFrame build_frame(int dim, const std::vector<Vec2>& verts,
                                const Vec2& b_cell) {
  CharacteristicFrame fr;
  fr.dim = dim;
  fr.b_cell = b_cell;
  fr.bnorm = norm(b_cell);
  if (!(fr.bnorm > 0.0))
    throw std::invalid_argument("build_frame: vanishing convection");
  fr.phys_verts = verts;
  fr.anchor = verts[0];
  if (dim == 1) {
    fr.r00 = b_cell.x > 0 ? 1.0 : -1.0;
    fr.diam = std::abs(verts[1].x - verts[0].x);
    fr.length_ok = fr.diam <= fr.bnorm;
    std::vector<double> xs;
    for (const auto& v : verts) xs.push_back(fr.to_frame(v).x);
    const double lo = std::min(xs[0], xs[1]);
    const double hi = std::max(xs[0], xs[1]);
    fr.fverts = {{lo, 0.0}, {hi, 0.0}};
    fr.xminus = {{0.0, 0.0, 0.0, lo}};
    fr.xplus = {{0.0, 0.0, 0.0, hi}};
    fr.pieces = {{{{lo, 0.0}, {hi, 0.0}}, 0.0, 0.0}};
    fr.n_inflow_faces = 1;
    fr.single_inflow = true;
    fr.sa = 0.0;
    fr.sb = lo;
    fr.shadow_verts = fr.fverts;
    return fr;
  }

  const Vec2 bo = b_cell * (1.0 / fr.bnorm);
  fr.r00 = bo.x;
  fr.r01 = bo.y;
  fr.r10 = -bo.y;
  fr.r11 = bo.x;
  fr.diam = std::max({dist(verts[0], verts[1]), dist(verts[1], verts[2]),
                      dist(verts[0], verts[2])});
  fr.length_ok = fr.diam <= fr.bnorm;
  for (const auto& v : verts) fr.fverts.push_back(fr.to_frame(v));

  const double tol = 1e-13 * std::max(1.0, fr.diam);
  std::vector<double> ys = {fr.fverts[0].y, fr.fverts[1].y, fr.fverts[2].y};
  std::sort(ys.begin(), ys.end());
  std::vector<double> breaks = {ys[0]};
  for (double y : {ys[1], ys[2]})
    if (y > breaks.back() + tol) breaks.push_back(y);

  for (size_t k = 0; k + 1 < breaks.size(); ++k) {
    const double y0 = breaks[k], y1 = breaks[k + 1];
    // envelopes are affine on [y0,y1]; interpolate through the endpoint
    // cross-sections (evaluated slightly inside to dodge vertex ties)
    const double e = 1e-9 * (y1 - y0);
    const auto c0 = cross_section(fr.fverts, y0 + e, tol);
    const auto c1 = cross_section(fr.fverts, y1 - e, tol);
    auto affine_through = [&](double v0, double v1) {
      const double a = (v1 - v0) / ((y1 - e) - (y0 + e));
      return CharacteristicFrame::Seg{y0, y1, a, v0 - a * (y0 + e)};
    };
    fr.xminus.push_back(affine_through(c0.first, c1.first));
    fr.xplus.push_back(affine_through(c0.second, c1.second));
    CharacteristicFrame::Piece pc;
    pc.y0 = y0;
    pc.y1 = y1;
    // the piece is the triangle spanned by the end cross-sections
    std::vector<Vec2> pts = {{fr.xminus.back().at(y0), y0},
                             {fr.xplus.back().at(y0), y0},
                             {fr.xminus.back().at(y1), y1},
                             {fr.xplus.back().at(y1), y1}};
    std::vector<Vec2> uniq;
    for (const auto& p : pts) {
      bool dup = false;
      for (const auto& u : uniq)
        if (dist(u, p) <= 10 * tol) dup = true;
      if (!dup) uniq.push_back(p);
    }
    if (uniq.size() != 3)
      throw std::runtime_error("build_frame: degenerate subdivision piece");
    pc.verts = uniq;
    fr.pieces.push_back(pc);
  }

  // inflow faces and the dominant one
  const double btol = 1e-12 * fr.bnorm;
  int best_face = -1;
  double best_nx = 0.0;
  fr.n_inflow_faces = 0;
  for (int f = 0; f < 3; ++f) {
    const Vec2& p = fr.fverts[(f + 1) % 3];
    const Vec2& q = fr.fverts[(f + 2) % 3];
    Vec2 n = perp(q - p);
    n = n * (1.0 / norm(n));
    if (dot(n, fr.fverts[f] - p) > 0.0) n = n * -1.0;  // outward
    const double bn = fr.bnorm * n.x;
    if (bn < -btol) {
      ++fr.n_inflow_faces;
      if (std::abs(n.x) > std::abs(best_nx)) {
        best_nx = n.x;
        best_face = f;
      }
    }
  }
  if (best_face < 0)
    throw std::runtime_error("build_frame: cell has no inflow face");
  fr.single_inflow = (fr.n_inflow_faces == 1);

  // x_bar: the line through the dominant inflow face
  {
    const Vec2& p = fr.fverts[(best_face + 1) % 3];
    const Vec2& q = fr.fverts[(best_face + 2) % 3];
    fr.sa = (q.x - p.x) / (q.y - p.y);
    fr.sb = p.x - fr.sa * p.y;
    // enclosing cell: opposite vertex + the face line over the full y-range
    const Vec2& v = fr.fverts[best_face];
    const double ylo = breaks.front(), yhi = breaks.back();
    fr.shadow_verts = {v,
                       {fr.sa * ylo + fr.sb, ylo},
                       {fr.sa * yhi + fr.sb, yhi}};
  }
  return fr;
}

LocalResidualData make_local_data(const CharacteristicFrame& frame,
                                  const Poly& u_phys, const Poly& w_phys,
                                  const std::array<Poly, 2>& btilde_phys,
                                  const Poly& ctilde_phys,
                                  const Poly& ftilde_phys, double d_avg) {
  const int dim = frame.dim;
  const Poly mu_p = w_phys - u_phys;
  Poly bw = btilde_phys[0] * w_phys.derivative(0);
  Poly bmu = btilde_phys[0] * mu_p.derivative(0);
  if (dim == 2) {
    bw += btilde_phys[1] * w_phys.derivative(1);
    bmu += btilde_phys[1] * mu_p.derivative(1);
  }
  const Poly lam_p = bw + ctilde_phys * w_phys - ftilde_phys;
  const Poly gam_p = lam_p - (bmu + ctilde_phys * mu_p + mu_p * d_avg);
  LocalResidualData d;
  d.mu = frame.to_frame_poly(mu_p);
  d.lam = frame.to_frame_poly(lam_p);
  d.gam = frame.to_frame_poly(gam_p);
  d.ctil = frame.to_frame_poly(ctilde_phys);
  d.d = d_avg;
  d.bnorm = frame.bnorm;
  return d;
}

LocalLift LocalLift::broadcast(const CharacteristicFrame& frame,
                               const Poly& p) {
  LocalLift l;
  l.piece_poly.assign(frame.pieces.size(), p);
  return l;
}

double LocalLift::at(const CharacteristicFrame& frame,
                     const Vec2& frame_pt) const {
  const int p =
      frame.dim == 1 ? 0 : frame.piece_of(frame_pt.y);
  return piece_poly[p].at(frame_pt);
}

namespace {

QuadRule piece_rule(const CharacteristicFrame& frame, int piece, int order) {
  const auto& pc = frame.pieces[piece];
  if (frame.dim == 1) return interval_rule(pc.verts[0].x, pc.verts[1].x, order);
  return triangle_rule(pc.verts[0], pc.verts[1], pc.verts[2], order);
}

}  // namespace

double special_inner_product(const CharacteristicFrame& frame,
                             const LocalLift& v, const LocalLift& z) {
  double s = 0.0;
  for (size_t p = 0; p < frame.pieces.size(); ++p) {
    const Poly dv = v.piece_poly[p].derivative(0) * frame.bnorm;
    const Poly dz = z.piece_poly[p].derivative(0) * frame.bnorm;
    const Poly prod = dv * dz;
    const int order = prod.total_degree() + 2;
    s += piece_rule(frame, static_cast<int>(p), order).integrate(prod);
  }
  if (frame.dim == 1) {
    const double xm = frame.xminus[0].b;
    const double r = frame.xplus[0].b - xm;
    s += v.piece_poly[0](xm) * z.piece_poly[0](xm) * r;
    return s;
  }
  // boundary term: ds |b°.n| = dy along the entry envelope, weight r(y)
  for (size_t p = 0; p < frame.pieces.size(); ++p) {
    const auto& sm = frame.xminus[p];
    const auto& sp = frame.xplus[p];
    if (sm.y1 - sm.y0 <= 0.0) continue;
    const Poly vb = v.piece_poly[p].substitute_x(sm.a, sm.b);
    const Poly zb = z.piece_poly[p].substitute_x(sm.a, sm.b);
    // r(y) = xplus - xminus as a polynomial in y
    Poly ry(2);
    ry.set_coeff(0, 1, sp.a - sm.a);
    ry.set_coeff(0, 0, sp.b - sm.b);
    const Poly integrand = vb * zb * ry;
    const int order = std::max(40, integrand.total_degree() + 2);
    // integrand depends on y only; integrate dy
    const QuadRule q = interval_rule(sm.y0, sm.y1, order);
    for (size_t i = 0; i < q.pts.size(); ++i)
      s += q.w[i] * integrand(0.0, q.pts[i].x);
  }
  return s;
}

double special_inner_product(const CharacteristicFrame& frame, const Poly& v,
                             const Poly& z) {
  return special_inner_product(frame, LocalLift::broadcast(frame, v),
                               LocalLift::broadcast(frame, z));
}

LocalLift exact_modified_lift(const CharacteristicFrame& frame,
                              const LocalResidualData& data) {
  const double ib = 1.0 / data.bnorm;
  const double ib2 = ib * ib;
  const Poly gamma1 = data.gam.antiderivative_x();
  const Poly gamma2 = gamma1.antiderivative_x();
  // d_b mu + gamma, with d_b = |b| d/dx in frame coordinates
  const Poly flux = data.mu.derivative(0) * data.bnorm + data.gam;

  LocalLift lift;
  for (size_t p = 0; p < frame.pieces.size(); ++p) {
    const auto& sm = frame.xminus[p];
    const auto& sp = frame.xplus[p];
    const Poly x = Poly::var(frame.dim, 0);
    Poly xm(frame.dim), x_minus_xm(frame.dim);
    if (frame.dim == 1) {
      xm = Poly::constant(1, sm.b);
    } else {
      xm = Poly::var(2, 1) * sm.a + Poly::constant(2, sm.b);
    }
    x_minus_xm = x - xm;

    const Poly g2_at_xm = gamma2.substitute_x(sm.a, sm.b);
    const Poly g1_at_xm = gamma1.substitute_x(sm.a, sm.b);
    const Poly g1_at_xp = gamma1.substitute_x(sp.a, sp.b);
    const Poly mu_at_xp = data.mu.substitute_x(sp.a, sp.b);

    // -|b|^-2 int_{x_-}^{x} int_{x_-}^{z} gamma
    const Poly term1 =
        (gamma2 - g2_at_xm - g1_at_xm * x_minus_xm) * (-ib2);
    // (|b|^-1 mu(x_+) + |b|^-2 int_{x_-}^{x_+} gamma) (x - x_-)
    const Poly term2 =
        (mu_at_xp * ib + (g1_at_xp - g1_at_xm) * ib2) * x_minus_xm;
    // average of (d_b mu + gamma) over the characteristic; exact divided
    // difference, no division by r(s)
    const Poly term3 = flux.char_average_x(sm.a, sm.b, sp.a, sp.b);

    Poly r = term1 + term2 + term3;
    r.trim(0.0);
    lift.piece_poly.push_back(r);
  }
  return lift;
}

Poly approximate_lift(const CharacteristicFrame& frame,
                      const LocalResidualData& data) {
  const double ib = 1.0 / data.bnorm;
  const Poly x = Poly::var(frame.dim, 0);
  Poly xbar(frame.dim);
  if (frame.dim == 1) {
    xbar = Poly::constant(1, frame.sb);
  } else {
    xbar = Poly::var(2, 1) * frame.sa + Poly::constant(2, frame.sb);
  }
  const Poly mu_b = data.mu.substitute_x(frame.sa, frame.sb);
  const Poly rest =
      (data.lam - (data.ctil + Poly::constant(frame.dim, data.d)) * data.mu)
          .substitute_x(frame.sa, frame.sb);
  Poly r = mu_b * ib * (x - xbar) + rest;
  r.trim(0.0);
  return r;
}

double modified_form(const CharacteristicFrame& frame, const Poly& u_phys,
                     const Poly& w_phys,
                     const std::array<Poly, 2>& btilde_phys,
                     const Poly& ctilde_phys, double d_avg,
                     const Poly& v_phys) {
  const int dim = frame.dim;
  Poly bu = btilde_phys[0] * u_phys.derivative(0);
  if (dim == 2) bu += btilde_phys[1] * u_phys.derivative(1);
  const Poly wmu = w_phys - u_phys;
  // the volume carries -d (w-u): with the +d sign the form would not be the
  // Riesz pre-image of the closed-form lift whenever div(btilde) != 0
  const Poly vol = (bu + ctilde_phys * u_phys - wmu * d_avg) * v_phys;
  const QuadRule q = cell_rule(dim, frame.phys_verts,
                               vol.total_degree() + 2);
  double s = q.integrate(vol);
  // full cell boundary with the frozen normal flux b_cell.n
  if (dim == 1) {
    const double xl = std::min(frame.phys_verts[0].x, frame.phys_verts[1].x);
    const double xr = std::max(frame.phys_verts[0].x, frame.phys_verts[1].x);
    const Poly bdry = wmu * v_phys;
    s += frame.b_cell.x * (bdry(xr) - bdry(xl));
  } else {
    const Poly bdry = wmu * v_phys;
    for (int f = 0; f < 3; ++f) {
      const Vec2& p = frame.phys_verts[(f + 1) % 3];
      const Vec2& qq = frame.phys_verts[(f + 2) % 3];
      Vec2 n = perp(qq - p);
      n = n * (1.0 / norm(n));
      if (dot(n, frame.phys_verts[f] - p) > 0.0) n = n * -1.0;
      const double bn = dot(frame.b_cell, n);
      if (bn == 0.0) continue;
      const QuadRule fq = segment_rule(p, qq, bdry.total_degree() + 2);
      s += bn * fq.integrate(bdry);
    }
  }
  return s;
}

LiftNorms lift_norms(const CharacteristicFrame& frame, const LocalLift& v) {
  LiftNorms n;
  for (size_t p = 0; p < frame.pieces.size(); ++p) {
    const Poly& vp = v.piece_poly[p];
    const Poly dv = vp.derivative(0) * frame.bnorm;
    const Poly integrand = vp * vp + dv * dv;
    const int order = integrand.total_degree() + 2;
    n.hb_sq += piece_rule(frame, static_cast<int>(p), order)
                   .integrate(integrand);
  }
  n.special_sq = special_inner_product(frame, v, v);
  return n;
}

double lift_distance_sq(const CharacteristicFrame& frame, const LocalLift& a,
                        const LocalLift& b) {
  double s = 0.0;
  for (size_t p = 0; p < frame.pieces.size(); ++p) {
    const Poly d = a.piece_poly[p] - b.piece_poly[p];
    const Poly dd = d.derivative(0) * frame.bnorm;
    const Poly integrand = d * d + dd * dd;
    s += piece_rule(frame, static_cast<int>(p),
                    integrand.total_degree() + 2)
             .integrate(integrand);
  }
  return s;
}

double hb_norm_sq_on(const CharacteristicFrame& frame,
                     const std::vector<Vec2>& region_fverts, const Poly& p) {
  const Poly dp = p.derivative(0) * frame.bnorm;
  const Poly integrand = p * p + dp * dp;
  const QuadRule q = cell_rule(frame.dim, region_fverts,
                               integrand.total_degree() + 2);
  return q.integrate(integrand);
}

double h1_seminorm_sq_on(const CharacteristicFrame& frame,
                         const std::vector<Vec2>& region_fverts,
                         const Poly& p) {
  Poly integrand = p.derivative(0) * p.derivative(0);
  if (frame.dim == 2) {
    integrand += p.derivative(1) * p.derivative(1);
  }
  const QuadRule q = cell_rule(frame.dim, region_fverts,
                               integrand.total_degree() + 2);
  return q.integrate(integrand);
}

}  // namespace dpgt
