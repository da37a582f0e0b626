#pragma once

#include <vector>

#include "dpgt/geometry.hpp"
#include "dpgt/polynomial.hpp"

namespace dpgt {

// Quadrature points/weights in physical coordinates.
struct QuadRule {
  std::vector<Vec2> pts;
  std::vector<double> w;

  template <class F>
  double sum(F&& f) const {
    double s = 0.0;
    for (size_t i = 0; i < pts.size(); ++i) s += w[i] * f(pts[i]);
    return s;
  }
  double integrate(const Poly& p) const {
    double s = 0.0;
    for (size_t i = 0; i < pts.size(); ++i) s += w[i] * p.at(pts[i]);
    return s;
  }
  // pointwise product evaluation; avoids the cancellation an expanded
  // product polynomial would pick up
  double integrate_product(const Poly& a, const Poly& b) const {
    double s = 0.0;
    for (size_t i = 0; i < pts.size(); ++i)
      s += w[i] * a.at(pts[i]) * b.at(pts[i]);
    return s;
  }
};

// n-point Gauss-Legendre nodes/weights on [0,1]
void gauss_legendre_01(int n, std::vector<double>& x, std::vector<double>& w);

// exact for polynomials of (total) degree <= order
QuadRule interval_rule(double a, double b, int order);
QuadRule triangle_rule(const Vec2& v0, const Vec2& v1, const Vec2& v2,
                       int order);
// line segment in the plane
QuadRule segment_rule(const Vec2& p0, const Vec2& p1, int order);

// generic simplex dispatch: verts has 2 entries in 1D, 3 in 2D
QuadRule cell_rule(int dim, const std::vector<Vec2>& verts, int order);

}  // namespace dpgt
