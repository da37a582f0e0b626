#pragma once

#include <array>
#include <cmath>
#include <vector>

namespace dpgt {

// Point / vector in R^2; 1D problems use the x component only.
struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2() = default;
  Vec2(double x_, double y_ = 0.0) : x(x_), y(y_) {}

  Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  Vec2& operator+=(const Vec2& o) { x += o.x; y += o.y; return *this; }
};

inline double dot(const Vec2& a, const Vec2& b) { return a.x * b.x + a.y * b.y; }
inline double norm(const Vec2& a) { return std::sqrt(dot(a, a)); }
inline double cross(const Vec2& a, const Vec2& b) { return a.x * b.y - a.y * b.x; }
// counter-clockwise perpendicular
inline Vec2 perp(const Vec2& a) { return {-a.y, a.x}; }

inline double triangle_area(const Vec2& a, const Vec2& b, const Vec2& c) {
  return 0.5 * std::abs(cross(b - a, c - a));
}

inline double dist(const Vec2& a, const Vec2& b) { return norm(a - b); }

// Convex polygon, vertices in counter-clockwise order.
using Polygon = std::vector<Vec2>;

double polygon_area(const Polygon& p);

// Intersection of a convex polygon with the half-plane dot(n, x) <= d
// (Sutherland-Hodgman step).
Polygon clip_halfplane(const Polygon& poly, const Vec2& n, double d);

// Intersection of two convex polygons (both counter-clockwise).
Polygon convex_intersection(const Polygon& a, const Polygon& b);

// Hull of a small point set, counter-clockwise (gift wrapping; fine for the
// handful of points a swept cell produces).
Polygon convex_hull(std::vector<Vec2> pts);

}  // namespace dpgt
