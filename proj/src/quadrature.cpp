#include "dpgt/quadrature.hpp"

#include <cmath>
#include <map>
#include <stdexcept>

namespace dpgt {

namespace {

// Gauss-Legendre on [-1,1] by Newton iteration on P_n; cached per n.
struct GL {
  std::vector<double> x, w;
};

const GL& gl_cache(int n) {
  static std::map<int, GL> cache;
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  GL g;
  g.x.resize(n);
  g.w.resize(n);
  for (int i = 0; i < n; ++i) {
    // Chebyshev initial guess
    double t = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    for (int iter = 0; iter < 100; ++iter) {
      // evaluate P_n and P_n' at t by recurrence
      double p0 = 1.0, p1 = t;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2 * k - 1) * t * p1 - (k - 1) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      const double dp = n * (t * p1 - p0) / (t * t - 1.0);
      const double dt = p1 / dp;
      t -= dt;
      if (std::abs(dt) < 1e-16) break;
    }
    double p0 = 1.0, p1 = t;
    for (int k = 2; k <= n; ++k) {
      const double p2 = ((2 * k - 1) * t * p1 - (k - 1) * p0) / k;
      p0 = p1;
      p1 = p2;
    }
    const double dp = n * (t * p1 - p0) / (t * t - 1.0);
    g.x[i] = t;
    g.w[i] = 2.0 / ((1.0 - t * t) * dp * dp);
  }
  return cache.emplace(n, std::move(g)).first->second;
}

}  // namespace

void gauss_legendre_01(int n, std::vector<double>& x, std::vector<double>& w) {
  if (n < 1) throw std::invalid_argument("gauss_legendre_01: n >= 1");
  const GL& g = gl_cache(n);
  x.resize(n);
  w.resize(n);
  for (int i = 0; i < n; ++i) {
    x[i] = 0.5 * (g.x[i] + 1.0);
    w[i] = 0.5 * g.w[i];
  }
}

QuadRule interval_rule(double a, double b, int order) {
  const int n = order / 2 + 1;
  std::vector<double> x, w;
  gauss_legendre_01(n, x, w);
  QuadRule r;
  r.pts.resize(n);
  r.w.resize(n);
  for (int i = 0; i < n; ++i) {
    r.pts[i] = {a + (b - a) * x[i], 0.0};
    r.w[i] = (b - a) * w[i];
  }
  return r;
}

QuadRule triangle_rule(const Vec2& v0, const Vec2& v1, const Vec2& v2,
                       int order) {
  // Duffy transform of a tensor Gauss rule on the reference triangle:
  // (u, v) in [0,1]^2 -> (u, v(1-u)), Jacobian (1-u).  The integrand picks up
  // one extra degree in u from the Jacobian.
  const int nu = (order + 2) / 2 + 1;
  const int nv = (order + 1) / 2 + 1;
  std::vector<double> xu, wu, xv, wv;
  gauss_legendre_01(nu, xu, wu);
  gauss_legendre_01(nv, xv, wv);
  const double area2 = std::abs(cross(v1 - v0, v2 - v0));  // 2*area
  QuadRule r;
  r.pts.reserve(static_cast<size_t>(nu) * nv);
  r.w.reserve(static_cast<size_t>(nu) * nv);
  for (int i = 0; i < nu; ++i)
    for (int j = 0; j < nv; ++j) {
      const double xi = xu[i];
      const double eta = xv[j] * (1.0 - xu[i]);
      r.pts.push_back(v0 + (v1 - v0) * xi + (v2 - v0) * eta);
      r.w.push_back(area2 * wu[i] * wv[j] * (1.0 - xu[i]));
    }
  return r;
}

QuadRule segment_rule(const Vec2& p0, const Vec2& p1, int order) {
  const int n = order / 2 + 1;
  std::vector<double> x, w;
  gauss_legendre_01(n, x, w);
  const double len = dist(p0, p1);
  QuadRule r;
  r.pts.resize(n);
  r.w.resize(n);
  for (int i = 0; i < n; ++i) {
    r.pts[i] = p0 + (p1 - p0) * x[i];
    r.w[i] = len * w[i];
  }
  return r;
}

QuadRule cell_rule(int dim, const std::vector<Vec2>& verts, int order) {
  if (dim == 1) return interval_rule(verts[0].x, verts[1].x, order);
  return triangle_rule(verts[0], verts[1], verts[2], order);
}

}  // namespace dpgt
