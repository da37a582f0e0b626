#include "dpgt/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include "dpgt/quadrature.hpp"

namespace dpgt {

namespace {

uint64_t edge_key(int a, int b) {
  if (a > b) std::swap(a, b);
  return (static_cast<uint64_t>(a) << 32) | static_cast<uint32_t>(b);
}

std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

int SimplicialMesh::leaf_index(int c) const {
  auto it = std::lower_bound(leaves.begin(), leaves.end(), c);
  if (it == leaves.end() || *it != c) return -1;
  return static_cast<int>(it - leaves.begin());
}

std::vector<Vec2> SimplicialMesh::cell_vertices(int c) const {
  std::vector<Vec2> vv;
  for (int k = 0; k <= dim; ++k) vv.push_back(vertices[cells[c].v[k]]);
  return vv;
}

double SimplicialMesh::cell_measure(int c) const {
  const auto vv = cell_vertices(c);
  if (dim == 1) return std::abs(vv[1].x - vv[0].x);
  return triangle_area(vv[0], vv[1], vv[2]);
}

double SimplicialMesh::cell_diameter(int c) const {
  const auto vv = cell_vertices(c);
  if (dim == 1) return std::abs(vv[1].x - vv[0].x);
  return std::max({dist(vv[0], vv[1]), dist(vv[1], vv[2]), dist(vv[0], vv[2])});
}

double SimplicialMesh::inball_diameter(int c) const {
  const auto vv = cell_vertices(c);
  if (dim == 1) return std::abs(vv[1].x - vv[0].x);
  const double per =
      dist(vv[0], vv[1]) + dist(vv[1], vv[2]) + dist(vv[0], vv[2]);
  return 4.0 * triangle_area(vv[0], vv[1], vv[2]) / per;
}

Vec2 SimplicialMesh::cell_centroid(int c) const {
  const auto vv = cell_vertices(c);
  Vec2 s;
  for (const auto& p : vv) s += p;
  return s * (1.0 / static_cast<double>(dim + 1));
}

double SimplicialMesh::total_measure() const {
  double s = 0.0;
  for (int c : leaves) s += cell_measure(c);
  return s;
}

double SimplicialMesh::domain_measure() const {
  double s = 0.0;
  for (size_t c = 0; c < cells.size(); ++c)
    if (cells[c].parent < 0) s += cell_measure(static_cast<int>(c));
  return s;
}

std::vector<int> SimplicialMesh::face_vertices(int c, int f) const {
  const auto& cv = cells[c].v;
  if (dim == 1) return {cv[f]};  // f=0: left endpoint, f=1: right
  // face f is opposite vertex f
  return {cv[(f + 1) % 3], cv[(f + 2) % 3]};
}

Vec2 SimplicialMesh::face_midpoint(int c, int f) const {
  const auto fv = face_vertices(c, f);
  if (dim == 1) return vertices[fv[0]];
  return (vertices[fv[0]] + vertices[fv[1]]) * 0.5;
}

Vec2 SimplicialMesh::face_outward_normal(int c, int f) const {
  if (dim == 1) {
    const auto& cv = cells[c].v;
    const double xl = vertices[cv[0]].x, xr = vertices[cv[1]].x;
    const double s = (xr > xl) ? 1.0 : -1.0;
    return f == 0 ? Vec2{-s, 0.0} : Vec2{s, 0.0};
  }
  const auto fv = face_vertices(c, f);
  const Vec2 a = vertices[fv[0]], b = vertices[fv[1]];
  Vec2 n = perp(b - a);
  n = n * (1.0 / norm(n));
  const Vec2 opp = vertices[cells[c].v[f]];
  if (dot(n, opp - a) > 0.0) n = n * -1.0;
  return n;
}

double SimplicialMesh::face_measure(int c, int f) const {
  if (dim == 1) return 1.0;  // counting measure on endpoints
  const auto fv = face_vertices(c, f);
  return dist(vertices[fv[0]], vertices[fv[1]]);
}

int SimplicialMesh::face_neighbor(int c, int f) const {
  const auto fv = face_vertices(c, f);
  if (dim == 1) {
    for (int o : leaves) {
      if (o == c) continue;
      const auto& ov = cells[o].v;
      if (ov[0] == fv[0] || ov[1] == fv[0]) return o;
    }
    return -1;
  }
  const uint64_t key = edge_key(fv[0], fv[1]);
  for (int o : leaves) {
    if (o == c) continue;
    const auto& ov = cells[o].v;
    for (int g = 0; g < 3; ++g)
      if (edge_key(ov[(g + 1) % 3], ov[(g + 2) % 3]) == key) return o;
  }
  return -1;
}

int SimplicialMesh::locate(const Vec2& p) const {
  const double tol = 1e-12;
  for (int c : leaves) {
    const auto vv = cell_vertices(c);
    if (dim == 1) {
      const double lo = std::min(vv[0].x, vv[1].x);
      const double hi = std::max(vv[0].x, vv[1].x);
      if (p.x >= lo - tol && p.x <= hi + tol) return c;
    } else {
      const double a = triangle_area(vv[0], vv[1], vv[2]);
      const double a0 = triangle_area(p, vv[1], vv[2]);
      const double a1 = triangle_area(vv[0], p, vv[2]);
      const double a2 = triangle_area(vv[0], vv[1], p);
      if (a0 + a1 + a2 <= a * (1.0 + 1e-10)) return c;
    }
  }
  return -1;
}

int SimplicialMesh::root_of(int c) const {
  while (cells[c].parent >= 0) c = cells[c].parent;
  return c;
}

int SimplicialMesh::ancestor_leaf_in(const SimplicialMesh& coarse,
                                     int c) const {
  int cur = c;
  while (cur >= 0) {
    if (cur < static_cast<int>(coarse.cells.size()) && coarse.is_leaf(cur))
      return cur;
    cur = cells[cur].parent;
  }
  throw std::runtime_error("ancestor_leaf_in: no ancestor is a coarse leaf");
}

Vec2 SimplicialMesh::bbox_min() const {
  Vec2 m{1e300, 1e300};
  for (const auto& p : vertices) {
    m.x = std::min(m.x, p.x);
    m.y = std::min(m.y, p.y);
  }
  return m;
}

Vec2 SimplicialMesh::bbox_max() const {
  Vec2 m{-1e300, -1e300};
  for (const auto& p : vertices) {
    m.x = std::max(m.x, p.x);
    m.y = std::max(m.y, p.y);
  }
  return m;
}

std::string SimplicialMesh::dump(const std::vector<double>* cell_data,
                                 const std::string& data_name) const {
  std::ostringstream os;
  os << "DIM " << dim << "\n";
  os << "VERTICES " << vertices.size() << "\n";
  for (const auto& p : vertices) {
    os << fmt17(p.x);
    if (dim == 2) os << " " << fmt17(p.y);
    os << "\n";
  }
  os << "CELLS " << leaves.size() << "\n";
  for (int c : leaves) {
    os << cells[c].v[0] << " " << cells[c].v[1];
    if (dim == 2) os << " " << cells[c].v[2];
    os << "\n";
  }
  if (cell_data) {
    os << "CELLDATA " << data_name << "\n";
    for (double v : *cell_data) os << fmt17(v) << "\n";
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// construction and refinement

SimplicialMesh build_root_mesh_interval(double a, double b, int resolution) {
  if (resolution < 1) throw std::invalid_argument("resolution >= 1");
  if (!(b > a)) throw std::invalid_argument("degenerate interval");
  SimplicialMesh m;
  m.dim = 1;
  for (int i = 0; i <= resolution; ++i)
    m.vertices.push_back({a + (b - a) * i / resolution, 0.0});
  for (int i = 0; i < resolution; ++i) {
    MeshCell c;
    c.v = {i, i + 1, -1};
    m.cells.push_back(c);
    m.leaves.push_back(i);
  }
  return m;
}

SimplicialMesh build_root_mesh_box(double ax, double bx, double ay, double by,
                                   int resolution) {
  if (resolution < 1) throw std::invalid_argument("resolution >= 1");
  if (!(bx > ax) || !(by > ay)) throw std::invalid_argument("degenerate box");
  SimplicialMesh m;
  m.dim = 2;
  const int n = resolution;
  auto vid = [&](int i, int j) { return j * (n + 1) + i; };
  for (int j = 0; j <= n; ++j)
    for (int i = 0; i <= n; ++i)
      m.vertices.push_back(
          {ax + (bx - ax) * i / n, ay + (by - ay) * j / n});
  // two triangles per sub-square; the diagonal is the bisection edge of both,
  // which makes the initial edge tagging compatible for newest-vertex
  // bisection
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) {
      const int p00 = vid(i, j), p10 = vid(i + 1, j);
      const int p01 = vid(i, j + 1), p11 = vid(i + 1, j + 1);
      MeshCell c1;
      c1.v = {p10, p01, p00};  // bisection edge = diagonal p10-p01
      MeshCell c2;
      c2.v = {p10, p01, p11};
      m.leaves.push_back(static_cast<int>(m.cells.size()));
      m.cells.push_back(c1);
      m.leaves.push_back(static_cast<int>(m.cells.size()));
      m.cells.push_back(c2);
    }
  return m;
}

// mutable view used only inside refine(); keeps an edge -> leaf-cells map so
// closure recursion can find neighbors fast
class MeshEditor {
 public:
  explicit MeshEditor(SimplicialMesh& m) : m_(m) {
    if (m_.dim == 2) {
      for (int c : m_.leaves) add_edges(c);
    }
    leaf_set_.insert(m_.leaves.begin(), m_.leaves.end());
  }

  void finalize() {
    m_.leaves.assign(leaf_set_.begin(), leaf_set_.end());
  }

  bool is_leaf(int c) const { return m_.cells[c].child[0] < 0; }

  void bisect_conforming(int c, int depth = 0) {
    if (depth > 512) throw std::runtime_error("refinement closure runaway");
    if (!is_leaf(c)) return;
    if (m_.dim == 1) {
      bisect(c);
      return;
    }
    const auto& cv = m_.cells[c].v;
    const uint64_t ekey = edge_key(cv[0], cv[1]);
    int nb = neighbor_across(ekey, c);
    if (nb >= 0) {
      const auto& nv = m_.cells[nb].v;
      if (edge_key(nv[0], nv[1]) != ekey) {
        bisect_conforming(nb, depth + 1);
        nb = neighbor_across(ekey, c);
        if (nb >= 0 && edge_key(m_.cells[nb].v[0], m_.cells[nb].v[1]) != ekey)
          throw std::runtime_error("refinement closure failed");
      }
    }
    bisect(c);
    if (nb >= 0) bisect(nb);
  }

 private:
  void add_edges(int c) {
    const auto& v = m_.cells[c].v;
    for (int g = 0; g < 3; ++g)
      edges_[edge_key(v[(g + 1) % 3], v[(g + 2) % 3])].push_back(c);
  }

  void remove_edges(int c) {
    const auto& v = m_.cells[c].v;
    for (int g = 0; g < 3; ++g) {
      auto& lst = edges_[edge_key(v[(g + 1) % 3], v[(g + 2) % 3])];
      lst.erase(std::remove(lst.begin(), lst.end(), c), lst.end());
    }
  }

  int neighbor_across(uint64_t key, int self) const {
    auto it = edges_.find(key);
    if (it == edges_.end()) return -1;
    for (int c : it->second)
      if (c != self) return c;
    return -1;
  }

  int midpoint(int a, int b) {
    const uint64_t key = edge_key(a, b);
    auto it = mid_.find(key);
    if (it != mid_.end()) return it->second;
    const Vec2 p = (m_.vertices[a] + m_.vertices[b]) * 0.5;
    const int id = static_cast<int>(m_.vertices.size());
    m_.vertices.push_back(p);
    mid_.emplace(key, id);
    return id;
  }

  void bisect(int c) {
    if (!is_leaf(c)) return;
    MeshCell& pc = m_.cells[c];
    const int a = pc.v[0], b = pc.v[1], peak = pc.v[2];
    const int m = (m_.dim == 1) ? midpoint(a, b) : midpoint(a, b);
    MeshCell c0, c1;
    if (m_.dim == 1) {
      c0.v = {a, m, -1};
      c1.v = {m, b, -1};
    } else {
      c0.v = {a, peak, m};  // bisection edge (a, peak), newest vertex m
      c1.v = {peak, b, m};
    }
    c0.parent = c1.parent = c;
    c0.generation = c1.generation = pc.generation + 1;
    const int i0 = static_cast<int>(m_.cells.size());
    m_.cells.push_back(c0);
    const int i1 = static_cast<int>(m_.cells.size());
    m_.cells.push_back(c1);
    m_.cells[c].child = {i0, i1};
    if (m_.dim == 2) {
      remove_edges(c);
      add_edges(i0);
      add_edges(i1);
    }
    leaf_set_.erase(c);
    leaf_set_.insert(i0);
    leaf_set_.insert(i1);
  }

  SimplicialMesh& m_;
  std::unordered_map<uint64_t, std::vector<int>> edges_;
  std::unordered_map<uint64_t, int> mid_;
  std::set<int> leaf_set_;
};

SimplicialMesh refine(const SimplicialMesh& mesh, const std::set<int>& marks,
                      int times) {
  for (int c : marks)
    if (!mesh.is_leaf(c))
      throw std::invalid_argument("refine: marks must be leaf cells");
  SimplicialMesh out = mesh;
  if (times <= 0 || marks.empty()) return out;
  // generation each marked subtree must reach
  std::unordered_map<int, int> target;
  for (int c : marks) target[c] = out.cells[c].generation + times;

  MeshEditor ed(out);
  auto required_gen = [&](int c) {
    int cur = c;
    int req = -1;
    while (cur >= 0) {
      auto it = target.find(cur);
      if (it != target.end()) req = std::max(req, it->second);
      cur = out.cells[cur].parent;
    }
    return req;
  };
  bool changed = true;
  while (changed) {
    changed = false;
    // snapshot: bisect_conforming invalidates leaf iteration
    std::vector<int> work;
    for (size_t c = 0; c < out.cells.size(); ++c) {
      if (!ed.is_leaf(static_cast<int>(c))) continue;
      const int req = required_gen(static_cast<int>(c));
      if (req > out.cells[c].generation) work.push_back(static_cast<int>(c));
    }
    for (int c : work)
      if (ed.is_leaf(c)) {
        ed.bisect_conforming(c);
        changed = true;
      }
  }
  ed.finalize();
  return out;
}

SubgridPair make_subgrid(const SimplicialMesh& coarse, int depth) {
  if (depth < 0) throw std::invalid_argument("make_subgrid: depth >= 0");
  SubgridPair p;
  p.coarse = coarse;
  p.depth = depth;
  p.fine = coarse;
  for (int l = 0; l < depth; ++l) {
    std::set<int> all(p.fine.leaves.begin(), p.fine.leaves.end());
    p.fine = refine(p.fine, all, 1);
  }
  // maps
  p.fine_to_coarse.resize(p.fine.n_leaves());
  p.coarse_to_fine.assign(coarse.n_leaves(), {});
  for (int i = 0; i < p.fine.n_leaves(); ++i) {
    const int anc = p.fine.ancestor_leaf_in(coarse, p.fine.leaves[i]);
    const int ci = coarse.leaf_index(anc);
    p.fine_to_coarse[i] = ci;
    p.coarse_to_fine[ci].push_back(i);
  }
  // realized subgrid factor
  double sigma = 0.0;
  for (int ci = 0; ci < coarse.n_leaves(); ++ci) {
    const double dc = coarse.cell_diameter(coarse.leaves[ci]);
    double ratio = 0.0;
    for (int fi : p.coarse_to_fine[ci])
      ratio = std::max(ratio, p.fine.cell_diameter(p.fine.leaves[fi]) / dc);
    sigma = std::max(sigma, std::max(ratio, dc));
  }
  p.sigma = sigma;
  return p;
}

FaceClassification classify_faces(
    const SimplicialMesh& mesh,
    const std::function<Vec2(const Vec2&)>& convection, double b_scale) {
  const double tol = 1e-12 * b_scale;
  FaceClassification fc;
  fc.kind.resize(mesh.n_leaves());
  for (int li = 0; li < mesh.n_leaves(); ++li) {
    const int c = mesh.leaves[li];
    fc.kind[li].resize(mesh.n_faces_per_cell());
    for (int f = 0; f <= mesh.dim; ++f) {
      const Vec2 n = mesh.face_outward_normal(c, f);
      double bn;
      if (mesh.dim == 1) {
        bn = dot(convection(mesh.face_midpoint(c, f)), n);
      } else {
        // face average of b.n
        const auto fv = mesh.face_vertices(c, f);
        const QuadRule q =
            segment_rule(mesh.vertices[fv[0]], mesh.vertices[fv[1]], 8);
        double s = 0.0;
        for (size_t i = 0; i < q.pts.size(); ++i)
          s += q.w[i] * dot(convection(q.pts[i]), n);
        bn = s / mesh.face_measure(c, f);
      }
      FaceKind k = FaceKind::Characteristic;
      if (bn < -tol) k = FaceKind::Inflow;
      else if (bn > tol) k = FaceKind::Outflow;
      fc.kind[li][f] = k;
      if (mesh.face_on_boundary(c, f)) {
        if (k == FaceKind::Inflow) fc.inflow_boundary.emplace_back(li, f);
        else if (k == FaceKind::Outflow)
          fc.outflow_boundary.emplace_back(li, f);
        else fc.characteristic_boundary.emplace_back(li, f);
      }
    }
  }
  return fc;
}

std::vector<SkeletonFace> skeleton_faces(const SimplicialMesh& mesh,
                                         const FaceClassification& faces) {
  // face key -> adjacent leaves
  std::unordered_map<uint64_t, std::vector<int>> adj;
  for (int li = 0; li < mesh.n_leaves(); ++li) {
    const int c = mesh.leaves[li];
    for (int f = 0; f <= mesh.dim; ++f) {
      const auto fv = mesh.face_vertices(c, f);
      const uint64_t key = (mesh.dim == 1) ? static_cast<uint64_t>(fv[0])
                                           : edge_key(fv[0], fv[1]);
      adj[key].push_back(li);
    }
  }
  std::vector<SkeletonFace> out;
  std::set<uint64_t> seen;  // interior faces once
  for (int li = 0; li < mesh.n_leaves(); ++li) {
    const int c = mesh.leaves[li];
    for (int f = 0; f <= mesh.dim; ++f) {
      if (faces.at(li, f) == FaceKind::Characteristic) continue;
      const auto fv = mesh.face_vertices(c, f);
      const uint64_t key = (mesh.dim == 1)
                               ? static_cast<uint64_t>(fv[0])
                               : edge_key(fv[0], fv[1]);
      if (seen.count(key)) continue;
      seen.insert(key);
      SkeletonFace sf;
      sf.verts = fv;
      sf.cell_in = li;
      sf.normal_in = mesh.face_outward_normal(c, f);
      sf.measure = mesh.face_measure(c, f);
      sf.cell_out = -1;
      for (int other : adj[key])
        if (other != li) sf.cell_out = other;
      out.push_back(sf);
    }
  }
  return out;
}

std::set<int> downwind_closure(const SimplicialMesh& mesh,
                               const std::set<int>& marks, const Vec2& b) {
  if (mesh.dim == 1) return marks;
  if (norm(b) == 0.0) return marks;
  const Vec2 lo = mesh.bbox_min(), hi = mesh.bbox_max();
  const double reach = 2.0 * (std::abs(hi.x - lo.x) + std::abs(hi.y - lo.y));
  const Vec2 shift = b * (reach / norm(b));
  const Polygon box = {{lo.x, lo.y}, {hi.x, lo.y}, {hi.x, hi.y}, {lo.x, hi.y}};

  auto swept = [&](int cell) {
    std::vector<Vec2> pts = mesh.cell_vertices(cell);
    for (int k = 0; k < 3; ++k) pts.push_back(pts[k] + shift);
    Polygon hull = convex_hull(pts);
    return convex_intersection(hull, box);
  };

  std::set<int> result = marks;
  bool grown = true;
  while (grown) {
    grown = false;
    std::vector<Polygon> sweeps;
    for (int c : result) sweeps.push_back(swept(c));
    for (int c : mesh.leaves) {
      if (result.count(c)) continue;
      const auto vv = mesh.cell_vertices(c);
      Polygon tri = {vv[0], vv[1], vv[2]};
      if (cross(vv[1] - vv[0], vv[2] - vv[0]) < 0)
        tri = {vv[0], vv[2], vv[1]};
      const double area = polygon_area(tri);
      for (const auto& sw : sweeps) {
        if (sw.size() < 3) continue;
        const Polygon inter = convex_intersection(tri, sw);
        if (polygon_area(inter) > 1e-12 * area) {
          result.insert(c);
          grown = true;
          break;
        }
      }
    }
  }
  return result;
}

}  // namespace dpgt
