#pragma once

#include <array>
#include <vector>

#include "dpgt/geometry.hpp"
#include "dpgt/polynomial.hpp"

namespace dpgt {

// Characteristic geometry of a single cell with the convection frozen to the
// constant b_cell: rotated coordinates with the first axis along the flow,
// entry/exit envelopes x_-(y) <= x_+(y), the characteristic subdivision of
// the cell, and the single-inflow enclosing cell used by the approximate
// lift.
class CharacteristicFrame {
 public:
  int dim = 1;
  Vec2 b_cell;
  double bnorm = 0.0;
  std::vector<Vec2> phys_verts;
  double diam = 0.0;
  bool length_ok = true;  // diam(K) <= |b_cell|

  // frame transform: q = R (p - anchor), first row of R along b_cell
  Vec2 anchor;
  double r00 = 1.0, r01 = 0.0, r10 = 0.0, r11 = 1.0;
  Vec2 to_frame(const Vec2& p) const;
  Vec2 from_frame(const Vec2& q) const;
  Poly to_frame_poly(const Poly& phys) const;
  Poly to_physical_poly(const Poly& framep) const;

  std::vector<Vec2> fverts;

  // affine envelope piece: x = a*y + b on [y0, y1] (y ignored in 1D)
  struct Seg {
    double y0 = 0.0, y1 = 0.0, a = 0.0, b = 0.0;
    double at(double y) const { return a * y + b; }
  };
  // aligned by piece: xminus[i], xplus[i] belong to pieces[i]
  std::vector<Seg> xminus, xplus;

  struct Piece {
    std::vector<Vec2> verts;  // frame coords; 2 points in 1D, 3 in 2D
    double y0 = 0.0, y1 = 0.0;
  };
  std::vector<Piece> pieces;

  int n_inflow_faces = 0;
  bool single_inflow = true;

  // x_bar(y) = sa*y + sb: the line of the dominant inflow face, agreeing
  // with x_- there; |sa| is the recorded Lipschitz bound
  double sa = 0.0, sb = 0.0;
  std::vector<Vec2> shadow_verts;  // frame coords of the enclosing cell

  double r_at(double y) const;  // x_+(y) - x_-(y)
  double xminus_at(double y) const;
  int piece_of(double y) const;
};

CharacteristicFrame build_frame(int dim, const std::vector<Vec2>& verts,
                                const Vec2& b_cell);

// polynomial data of the local residual in frame coordinates
struct LocalResidualData {
  Poly mu;    // w - u
  Poly lam;   // btilde.grad w + ctilde w - ftilde
  Poly gam;   // lam - (btilde.grad mu + ctilde mu + d mu)
  Poly ctil;  // ctilde in frame coordinates
  double d = 0.0;
  double bnorm = 0.0;
};

LocalResidualData make_local_data(const CharacteristicFrame& frame,
                                  const Poly& u_phys, const Poly& w_phys,
                                  const std::array<Poly, 2>& btilde_phys,
                                  const Poly& ctilde_phys,
                                  const Poly& ftilde_phys, double d_avg);

// function that is polynomial per characteristic piece, frame coordinates
struct LocalLift {
  std::vector<Poly> piece_poly;  // aligned with frame.pieces

  static LocalLift broadcast(const CharacteristicFrame& frame, const Poly& p);
  double at(const CharacteristicFrame& frame, const Vec2& frame_pt) const;
};

// <<v,z_>> = (d_b v, d_b z)_{L2(K)} + boundary term over the inflow part
double special_inner_product(const CharacteristicFrame& frame,
                             const LocalLift& v, const LocalLift& z);
double special_inner_product(const CharacteristicFrame& frame, const Poly& v,
                             const Poly& z);

// closed-form Riesz lift of the local modified residual
LocalLift exact_modified_lift(const CharacteristicFrame& frame,
                              const LocalResidualData& data);

// one-cell polynomial approximation of the exact lift
Poly approximate_lift(const CharacteristicFrame& frame,
                      const LocalResidualData& data);

// local modified bilinear form (volume + full cell boundary with frozen
// normal flux); polynomials in physical coordinates
double modified_form(const CharacteristicFrame& frame, const Poly& u_phys,
                     const Poly& w_phys,
                     const std::array<Poly, 2>& btilde_phys,
                     const Poly& ctilde_phys, double d_avg,
                     const Poly& v_phys);

struct LiftNorms {
  double hb_sq = 0.0;       // ||.||^2_{H(b;K)}
  double special_sq = 0.0;  // <<.,.>>
};
LiftNorms lift_norms(const CharacteristicFrame& frame, const LocalLift& v);

// squared H(b;K)-distance between two lifts (frame-coordinate comparison)
double lift_distance_sq(const CharacteristicFrame& frame, const LocalLift& a,
                        const LocalLift& b);

// squared H(b;R) norm of a frame polynomial over an arbitrary frame triangle
// or interval (used for norms over the enclosing cell)
double hb_norm_sq_on(const CharacteristicFrame& frame,
                     const std::vector<Vec2>& region_fverts, const Poly& p);
double h1_seminorm_sq_on(const CharacteristicFrame& frame,
                         const std::vector<Vec2>& region_fverts,
                         const Poly& p);

}  // namespace dpgt
