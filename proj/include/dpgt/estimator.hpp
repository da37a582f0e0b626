#pragma once

#include <array>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "dpgt/dpg.hpp"
#include "dpgt/lifts.hpp"
#include "dpgt/mesh.hpp"
#include "dpgt/problem.hpp"
#include "dpgt/quadrature.hpp"
#include "dpgt/spaces.hpp"

namespace dpgt {

// residual fields of a trial pair against the raw data:
//   g = b.grad w + c u - f,   e = u - w
// g is piecewise polynomial inside a cell when the 1D source has interior
// breakpoints; every norm below is integrated exactly piece by piece.
struct ResidualFields {
  struct CellField {
    // sub-intervals with polynomials (single full-cell entry in 2D or for
    // polynomial sources)
    std::vector<std::pair<std::array<double, 2>, Poly>> g;
    Poly e;
    double c = 0.0;  // reaction constant on this cell
    double g_norm2 = 0.0;
    double e_norm2 = 0.0;
    double ecg_norm2 = 0.0;  // ||e + c g||^2
  };
  const SimplicialMesh* mesh = nullptr;
  Vec2 b;
  std::vector<CellField> cells;  // per coarse leaf
};

ResidualFields residual_fields(const TransportProblem& problem,
                               const TrialFunction& fn,
                               const DiscretizationConfig& cfg);

// per-cell indicator record; eta2 = e_norm2 + g_norm2
struct CellIndicator {
  double eta2 = 0.0;
  double rdelta2 = 0.0;
  double e_norm2 = 0.0;
  double g_norm2 = 0.0;
  double ecg_norm2 = 0.0;
  double G_norm2 = 0.0;
  double alpha = 0.0;  // ||G|| / ||g||
  double omega = 0.0;  // ||e|| / ||g||
  int type = 1;        // 1 or 2
  bool marked = false;
};

struct IndicatorReport {
  std::vector<CellIndicator> cells;  // per coarse leaf
  double eta2_total = 0.0;
  double rdelta2_total = 0.0;
  double osc = 0.0;
  // cell_id,eta2,Rdelta2,alpha,omega,type,marked
  std::string csv(const SimplicialMesh& coarse) const;
};

// per-cell line averages of g along the constant convection
struct LineAverages {
  struct CellG {
    bool one_d = true;
    double value_1d = 0.0;          // G is constant per 1D cell
    CharacteristicFrame frame;      // 2D
    std::vector<Poly> avg;          // per frame piece, depends on y only
    double G_norm2 = 0.0;
    double g_minus_G_norm2 = 0.0;
    double cross_g_minus_G_G = 0.0;  // <g-G, G> (independent quadrature)
    double eval(const Vec2& phys) const;
  };
  std::vector<CellG> cells;
};

LineAverages line_average_field(const ResidualFields& fields,
                                const SimplicialMesh& coarse);

IndicatorReport make_report(const ResidualFields& fields,
                            const LineAverages& averages,
                            const LiftedResidual* rdelta, double osc,
                            double beta);

struct MarkResult {
  std::set<int> marked;      // coarse leaf cell ids
  std::set<int> type1;       // subset of marked
  std::set<int> type2;
};

// greedy bulk marking on eta^2 (or the lifted-residual norms), then the
// Type-I/II split of the marked cells
MarkResult classify_and_mark(IndicatorReport& report,
                             const SimplicialMesh& coarse, double theta,
                             double beta, bool use_rdelta);

// least-squares companion solve: minimizes the eta functional over the same
// trial space
TrialFunction solve_least_squares(const TransportProblem& problem,
                                  const TrialSpace& trial,
                                  const DiscretizationConfig& cfg);
double eta_total_sq(const TransportProblem& problem, const TrialFunction& fn,
                    const DiscretizationConfig& cfg);

// optimal local u-correction and the indicator reduction factor it attains
struct UminResult {
  Poly u_min;
  double reduction = 1.0;  // Q(u_min)/Q(0), 1 when Q(0)=0
};
UminResult umin_correction(const Poly& e, const Poly& g, double c,
                           const QuadRule& cell_quadrature);

// 1D transport solve z' = -c z + F, z(0) = 0, for piecewise-constant F and c
struct Oracle1dZ {
  struct Cell {
    double a, b, F, c, z_a;
  };
  std::vector<Cell> cells;  // ascending in x
  double z_norm = 0.0;
  double dz_norm = 0.0;
  double eval(double x) const;
  double deriv(double x) const;
};
Oracle1dZ oracle_1d_z(const std::vector<double>& F_per_leaf,
                      const std::vector<double>& c_per_leaf,
                      const SimplicialMesh& mesh);

// characteristic integral of g - G on one cell; vanishes on the inflow and
// outflow parts of the cell boundary
struct ZgLift {
  const CharacteristicFrame* frame = nullptr;
  std::vector<Poly> anti_g;  // antiderivative of g in frame x, per piece
  std::vector<Poly> avg;     // per piece
  double bnorm = 1.0;
  double eval_frame(const Vec2& q) const;
};
ZgLift zg_lift(const Poly& g_phys, const LineAverages::CellG& G,
               const CharacteristicFrame& frame);

struct ConjectureProbeResult {
  double xi = 0.0;            // achieved relative residual
  double w_over_F = 0.0;      // ||w|| / ||F||
  double F_norm = 0.0;
  int free_dofs = 0;
};

// constrained least squares || b.grad w + c w - F || over w-components on
// the refined mesh that vanish outside the refined region
ConjectureProbeResult conjecture_probe(
    const TransportProblem& problem, const LineAverages& averages,
    const IndicatorReport& report, const std::set<int>& type2_marked,
    const SimplicialMesh& coarse, const SimplicialMesh& refined,
    const std::set<int>& refined_region_cells,
    const DiscretizationConfig& cfg);

}  // namespace dpgt
