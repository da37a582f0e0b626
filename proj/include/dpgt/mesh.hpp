#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "dpgt/geometry.hpp"

namespace dpgt {

// One node of the refinement forest.  In 2D the bisection edge is
// (v[0], v[1]) and v[2] is the newest vertex; bisection inserts the edge
// midpoint m and produces children (v0, v2, m) and (v2, v1, m), so the
// children's bisection edges are the former legs.
struct MeshCell {
  std::array<int, 3> v{-1, -1, -1};
  int parent = -1;
  std::array<int, 2> child{-1, -1};
  int generation = 0;
};

// Conforming simplicial partition (intervals / triangles) carrying its full
// bisection forest.  A mesh value is immutable; refine() returns a new mesh
// that extends the forest, so cell ids stay valid across refinements.
class SimplicialMesh {
 public:
  int dim = 1;
  std::vector<Vec2> vertices;
  std::vector<MeshCell> cells;
  std::vector<int> leaves;  // active cell ids, ascending

  bool is_leaf(int c) const { return cells[c].child[0] < 0; }
  int n_leaves() const { return static_cast<int>(leaves.size()); }
  // position of cell id in leaves, -1 if not a leaf
  int leaf_index(int c) const;

  std::vector<Vec2> cell_vertices(int c) const;
  double cell_measure(int c) const;
  double cell_diameter(int c) const;
  // diameter of the largest inscribed ball
  double inball_diameter(int c) const;
  double shape_parameter(int c) const {
    return cell_diameter(c) / inball_diameter(c);
  }
  Vec2 cell_centroid(int c) const;
  double total_measure() const;
  double domain_measure() const;  // from root cells

  int n_faces_per_cell() const { return dim + 1; }
  // face f of cell c: vertex ids (1 entry in 1D, 2 in 2D)
  std::vector<int> face_vertices(int c, int f) const;
  Vec2 face_midpoint(int c, int f) const;
  Vec2 face_outward_normal(int c, int f) const;
  double face_measure(int c, int f) const;
  // leaf sharing face f of leaf c, or -1 on the boundary
  int face_neighbor(int c, int f) const;
  bool face_on_boundary(int c, int f) const { return face_neighbor(c, f) < 0; }

  // leaf cell containing the point (ties broken by lowest id); -1 if outside
  int locate(const Vec2& p) const;
  // root ancestor id of a cell
  int root_of(int c) const;
  // walks up from cell c until reaching a cell that is a leaf of `coarse`
  int ancestor_leaf_in(const SimplicialMesh& coarse, int c) const;

  // bounding box
  Vec2 bbox_min() const;
  Vec2 bbox_max() const;

  // plain-text dump (see README for the format); deterministic bytes
  std::string dump(const std::vector<double>* cell_data = nullptr,
                   const std::string& data_name = "") const;

 private:
  friend SimplicialMesh refine(const SimplicialMesh&, const std::set<int>&,
                               int);
  friend class MeshEditor;
};

// domain [a0,a1] (1D) or [a0,a1]x[b0,b1] (2D box split into 2*res^2
// triangles with bisection edges on the diagonals)
SimplicialMesh build_root_mesh_interval(double a, double b, int resolution);
SimplicialMesh build_root_mesh_box(double ax, double bx, double ay, double by,
                                   int resolution);

// r rounds of bisection of every marked leaf (descendants included),
// conformity restored by recursive closure
SimplicialMesh refine(const SimplicialMesh& mesh, const std::set<int>& marks,
                      int times);

// coarse partition plus its uniformly refined companion
struct SubgridPair {
  SimplicialMesh coarse;
  SimplicialMesh fine;
  int depth = 0;
  double sigma = 0.0;  // realized subgrid factor

  // per fine leaf index: leaf index in coarse
  std::vector<int> fine_to_coarse;
  // per coarse leaf index: fine leaf indices
  std::vector<std::vector<int>> coarse_to_fine;
};

SubgridPair make_subgrid(const SimplicialMesh& coarse, int depth);

enum class FaceKind : uint8_t { Inflow, Outflow, Characteristic };

struct FaceClassification {
  // [leaf][face]
  std::vector<std::vector<FaceKind>> kind;
  // domain-boundary faces by kind, as (leaf index, face) pairs
  std::vector<std::pair<int, int>> inflow_boundary;
  std::vector<std::pair<int, int>> outflow_boundary;
  std::vector<std::pair<int, int>> characteristic_boundary;

  FaceKind at(int leaf_idx, int f) const { return kind[leaf_idx][f]; }
};

// classification by the sign of b.n at the face midpoint (constant b) or the
// face average (varying b); |b.n| <= 1e-12 |b| counts as characteristic
FaceClassification classify_faces(
    const SimplicialMesh& mesh,
    const std::function<Vec2(const Vec2&)>& convection,
    double b_scale);

// skeleton of a fine mesh: non-characteristic faces with adjacency
struct SkeletonFace {
  std::vector<int> verts;   // 1 vertex in 1D, 2 in 2D
  int cell_in = -1;         // leaf index, outward normal stored below
  int cell_out = -1;        // second adjacent leaf index or -1 on boundary
  Vec2 normal_in;           // outward normal of cell_in on this face
  double measure = 0.0;
};

std::vector<SkeletonFace> skeleton_faces(const SimplicialMesh& mesh,
                                         const FaceClassification& faces);

// marked set closed under the forward sweep along a constant convection
// (identity in 1D); iterated to a fixed point so the result is stable under
// re-application
std::set<int> downwind_closure(const SimplicialMesh& mesh,
                               const std::set<int>& marks, const Vec2& b);

}  // namespace dpgt
