#pragma once

#include <vector>

#include "dpgt/geometry.hpp"

namespace dpgt {

// Dense polynomial in one or two variables over the monomial basis
// x^i y^j.  All coefficient operations are exact up to rounding, which keeps
// the residual-lift algebra free of quadrature error: derivatives,
// antiderivatives, affine substitutions and characteristic averages stay
// inside the class.
class Poly {
 public:
  Poly() : dim_(1), nx_(1), ny_(1), c_(1, 0.0) {}
  explicit Poly(int dim) : dim_(dim), nx_(1), ny_(1), c_(1, 0.0) {}

  static Poly constant(int dim, double v);
  // axis 0 -> x, axis 1 -> y
  static Poly var(int dim, int axis);

  int dim() const { return dim_; }
  int deg_x() const { return nx_ - 1; }
  int deg_y() const { return ny_ - 1; }
  int total_degree() const;
  bool is_zero(double tol = 0.0) const;

  double coeff(int i, int j) const;
  void set_coeff(int i, int j, double v);

  double operator()(double x, double y = 0.0) const;
  double at(const Vec2& p) const { return (*this)(p.x, p.y); }

  Poly operator+(const Poly& o) const;
  Poly operator-(const Poly& o) const;
  Poly operator*(const Poly& o) const;
  Poly operator*(double s) const;
  Poly operator-() const { return (*this) * -1.0; }
  Poly& operator+=(const Poly& o) { *this = *this + o; return *this; }
  Poly& operator-=(const Poly& o) { *this = *this - o; return *this; }

  Poly derivative(int axis) const;
  // antiderivative in x with zero constant term
  Poly antiderivative_x() const;

  // p(a11*X + a12*Y + t1, a21*X + a22*Y + t2) as a polynomial in (X, Y)
  Poly compose_affine(double a11, double a12, double t1,
                      double a21, double a22, double t2) const;

  // substitute x := a*y + b; the result depends on y only
  Poly substitute_x(double a, double b) const;

  // average over the characteristic segment: for p = sum_k a_k(y) x^k,
  //   avg(y) = sum_k a_k(y)/(k+1) * sum_{j=0..k} xp(y)^j xm(y)^{k-j}
  // with xm(y) = am*y+bm, xp(y) = ap*y+bp.  This equals
  // (int_{xm}^{xp} p dx)/(xp-xm) and stays polynomial even where xp == xm.
  Poly char_average_x(double am, double bm, double ap, double bp) const;

  // definite integral over [a,b] (1D polynomials)
  double integrate_interval(double a, double b) const;

  void trim(double tol = 0.0);

 private:
  Poly(int dim, int nx, int ny) : dim_(dim), nx_(nx), ny_(ny),
                                  c_(static_cast<size_t>(nx) * ny, 0.0) {}
  double& at_ref(int i, int j) { return c_[static_cast<size_t>(j) * nx_ + i]; }
  double at_val(int i, int j) const {
    return c_[static_cast<size_t>(j) * nx_ + i];
  }

  int dim_;
  int nx_, ny_;            // nx_ = deg_x + 1, ny_ = deg_y + 1
  std::vector<double> c_;  // column-major over y
};

// 1D convenience: polynomial from coefficients c0 + c1 x + ...
Poly poly_1d(const std::vector<double>& coeffs);

}  // namespace dpgt
