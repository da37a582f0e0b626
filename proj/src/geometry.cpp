#include "dpgt/geometry.hpp"

#include <algorithm>

namespace dpgt {

double polygon_area(const Polygon& p) {
  if (p.size() < 3) return 0.0;
  double s = 0.0;
  for (size_t i = 0; i < p.size(); ++i) {
    const Vec2& a = p[i];
    const Vec2& b = p[(i + 1) % p.size()];
    s += cross(a, b);
  }
  return 0.5 * std::abs(s);
}

Polygon clip_halfplane(const Polygon& poly, const Vec2& n, double d) {
  Polygon out;
  const size_t m = poly.size();
  for (size_t i = 0; i < m; ++i) {
    const Vec2& a = poly[i];
    const Vec2& b = poly[(i + 1) % m];
    const double da = dot(n, a) - d;
    const double db = dot(n, b) - d;
    if (da <= 0.0) out.push_back(a);
    if ((da < 0.0 && db > 0.0) || (da > 0.0 && db < 0.0)) {
      const double t = da / (da - db);
      out.push_back(a + (b - a) * t);
    }
  }
  return out;
}

Polygon convex_intersection(const Polygon& a, const Polygon& b) {
  Polygon r = a;
  const size_t m = b.size();
  for (size_t i = 0; i < m && !r.empty(); ++i) {
    const Vec2& p = b[i];
    const Vec2& q = b[(i + 1) % m];
    // inward normal of edge p->q for a CCW polygon is perp(q-p)
    const Vec2 e = q - p;
    const Vec2 n = Vec2{e.y, -e.x};  // outward for CCW
    r = clip_halfplane(r, n, dot(n, p));
  }
  return r;
}

Polygon convex_hull(std::vector<Vec2> pts) {
  if (pts.size() < 3) return pts;
  std::sort(pts.begin(), pts.end(), [](const Vec2& a, const Vec2& b) {
    return a.x < b.x || (a.x == b.x && a.y < b.y);
  });
  pts.erase(std::unique(pts.begin(), pts.end(),
                        [](const Vec2& a, const Vec2& b) {
                          return a.x == b.x && a.y == b.y;
                        }),
            pts.end());
  const size_t n = pts.size();
  if (n < 3) return pts;
  std::vector<Vec2> hull(2 * n);
  size_t k = 0;
  for (size_t i = 0; i < n; ++i) {  // lower
    while (k >= 2 &&
           cross(hull[k - 1] - hull[k - 2], pts[i] - hull[k - 2]) <= 0)
      --k;
    hull[k++] = pts[i];
  }
  for (size_t i = n - 1, t = k + 1; i-- > 0;) {  // upper
    while (k >= t &&
           cross(hull[k - 1] - hull[k - 2], pts[i] - hull[k - 2]) <= 0)
      --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;
}

}  // namespace dpgt
