#include "dpgt/polynomial.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dpgt {

Poly Poly::constant(int dim, double v) {
  Poly p(dim);
  p.c_[0] = v;
  return p;
}

Poly Poly::var(int dim, int axis) {
  if (axis < 0 || axis >= dim) throw std::invalid_argument("Poly::var axis");
  Poly p(dim, axis == 0 ? 2 : 1, axis == 1 ? 2 : 1);
  p.at_ref(axis == 0 ? 1 : 0, axis == 1 ? 1 : 0) = 1.0;
  return p;
}

int Poly::total_degree() const {
  int d = 0;
  for (int j = 0; j < ny_; ++j)
    for (int i = 0; i < nx_; ++i)
      if (at_val(i, j) != 0.0) d = std::max(d, i + j);
  return d;
}

bool Poly::is_zero(double tol) const {
  for (double v : c_)
    if (std::abs(v) > tol) return false;
  return true;
}

double Poly::coeff(int i, int j) const {
  if (i < 0 || j < 0 || i >= nx_ || j >= ny_) return 0.0;
  return at_val(i, j);
}

void Poly::set_coeff(int i, int j, double v) {
  if (i >= nx_ || j >= ny_) {
    Poly grown(dim_, std::max(nx_, i + 1), std::max(ny_, j + 1));
    for (int jj = 0; jj < ny_; ++jj)
      for (int ii = 0; ii < nx_; ++ii) grown.at_ref(ii, jj) = at_val(ii, jj);
    *this = grown;
  }
  at_ref(i, j) = v;
}

double Poly::operator()(double x, double y) const {
  // Horner in x inside Horner in y
  double r = 0.0;
  for (int j = ny_ - 1; j >= 0; --j) {
    double row = 0.0;
    for (int i = nx_ - 1; i >= 0; --i) row = row * x + at_val(i, j);
    r = r * y + row;
  }
  return r;
}

Poly Poly::operator+(const Poly& o) const {
  Poly r(std::max(dim_, o.dim_), std::max(nx_, o.nx_), std::max(ny_, o.ny_));
  for (int j = 0; j < r.ny_; ++j)
    for (int i = 0; i < r.nx_; ++i)
      r.at_ref(i, j) = coeff(i, j) + o.coeff(i, j);
  return r;
}

Poly Poly::operator-(const Poly& o) const { return *this + (o * -1.0); }

Poly Poly::operator*(const Poly& o) const {
  Poly r(std::max(dim_, o.dim_), nx_ + o.nx_ - 1, ny_ + o.ny_ - 1);
  for (int j = 0; j < ny_; ++j)
    for (int i = 0; i < nx_; ++i) {
      const double a = at_val(i, j);
      if (a == 0.0) continue;
      for (int l = 0; l < o.ny_; ++l)
        for (int k = 0; k < o.nx_; ++k)
          r.at_ref(i + k, j + l) += a * o.at_val(k, l);
    }
  return r;
}

Poly Poly::operator*(double s) const {
  Poly r = *this;
  for (double& v : r.c_) v *= s;
  return r;
}

Poly Poly::derivative(int axis) const {
  if (axis == 0) {
    if (nx_ == 1) return Poly(dim_);
    Poly r(dim_, nx_ - 1, ny_);
    for (int j = 0; j < ny_; ++j)
      for (int i = 1; i < nx_; ++i) r.at_ref(i - 1, j) = i * at_val(i, j);
    return r;
  }
  if (ny_ == 1) return Poly(dim_);
  Poly r(dim_, nx_, ny_ - 1);
  for (int j = 1; j < ny_; ++j)
    for (int i = 0; i < nx_; ++i) r.at_ref(i, j - 1) = j * at_val(i, j);
  return r;
}

Poly Poly::antiderivative_x() const {
  Poly r(dim_, nx_ + 1, ny_);
  for (int j = 0; j < ny_; ++j)
    for (int i = 0; i < nx_; ++i) r.at_ref(i + 1, j) = at_val(i, j) / (i + 1);
  return r;
}

Poly Poly::compose_affine(double a11, double a12, double t1,
                          double a21, double a22, double t2) const {
  const Poly X = Poly::var(2, 0), Y = Poly::var(2, 1);
  const Poly sx = X * a11 + Y * a12 + Poly::constant(2, t1);
  const Poly sy = X * a21 + Y * a22 + Poly::constant(2, t2);
  // Horner over y, then over x
  Poly result(2);
  for (int j = ny_ - 1; j >= 0; --j) {
    Poly row(2);
    for (int i = nx_ - 1; i >= 0; --i) {
      row = row * sx + Poly::constant(2, at_val(i, j));
    }
    result = result * sy + row;
  }
  result.trim();
  return result;
}

Poly Poly::substitute_x(double a, double b) const {
  const Poly sub = (dim_ == 1) ? poly_1d({b, a})  // unused for dim 1 below
                               : Poly::var(2, 1) * a + Poly::constant(2, b);
  Poly result(dim_);
  for (int i = nx_ - 1; i >= 0; --i) {
    // a_i(y) as a polynomial
    Poly ai(dim_);
    for (int j = 0; j < ny_; ++j) ai.set_coeff(0, j, at_val(i, j));
    result = result * sub + ai;
  }
  result.trim();
  return result;
}

Poly Poly::char_average_x(double am, double bm, double ap, double bp) const {
  const Poly xm = (dim_ == 1) ? Poly::constant(1, bm)
                              : Poly::var(2, 1) * am + Poly::constant(2, bm);
  const Poly xp = (dim_ == 1) ? Poly::constant(1, bp)
                              : Poly::var(2, 1) * ap + Poly::constant(2, bp);
  // powers of xm, xp up to deg_x
  std::vector<Poly> pm(nx_), pp(nx_);
  pm[0] = Poly::constant(dim_, 1.0);
  pp[0] = Poly::constant(dim_, 1.0);
  for (int k = 1; k < nx_; ++k) {
    pm[k] = pm[k - 1] * xm;
    pp[k] = pp[k - 1] * xp;
  }
  Poly result(dim_);
  for (int k = 0; k < nx_; ++k) {
    Poly ak(dim_);
    for (int j = 0; j < ny_; ++j) ak.set_coeff(0, j, at_val(k, j));
    if (ak.is_zero()) continue;
    Poly h(dim_);  // sum_{j=0..k} xp^j xm^{k-j}
    for (int j = 0; j <= k; ++j) h += pp[j] * pm[k - j];
    result += ak * h * (1.0 / (k + 1));
  }
  result.trim();
  return result;
}

double Poly::integrate_interval(double a, double b) const {
  const Poly P = antiderivative_x();
  return P(b) - P(a);
}

void Poly::trim(double tol) {
  int mx = 0, my = 0;
  for (int j = 0; j < ny_; ++j)
    for (int i = 0; i < nx_; ++i)
      if (std::abs(at_val(i, j)) > tol) {
        mx = std::max(mx, i);
        my = std::max(my, j);
      }
  if (mx + 1 == nx_ && my + 1 == ny_) return;
  Poly r(dim_, mx + 1, my + 1);
  for (int j = 0; j <= my; ++j)
    for (int i = 0; i <= mx; ++i)
      r.at_ref(i, j) = std::abs(at_val(i, j)) > tol ? at_val(i, j) : 0.0;
  *this = r;
}

Poly poly_1d(const std::vector<double>& coeffs) {
  Poly p(1);
  for (size_t i = 0; i < coeffs.size(); ++i)
    p.set_coeff(static_cast<int>(i), 0, coeffs[i]);
  return p;
}

}  // namespace dpgt
