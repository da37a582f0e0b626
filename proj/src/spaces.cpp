#include "dpgt/spaces.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include "dpgt/quadrature.hpp"

namespace dpgt {

namespace {

// barycentric lattice multi-indices for P_m on a simplex
// 1D: (i, m-i); 2D: (i, j, m-i-j) with weights over (v0, v1, v2)
struct LatticeNode {
  std::array<int, 3> idx;  // sums to m
};

std::vector<LatticeNode> lattice(int dim, int m) {
  std::vector<LatticeNode> out;
  if (dim == 1) {
    for (int i = 0; i <= m; ++i) out.push_back({{m - i, i, 0}});
  } else {
    for (int i = 0; i <= m; ++i)
      for (int j = 0; i + j <= m; ++j)
        out.push_back({{m - i - j, i, j}});  // weights of (v0, v1, v2)
  }
  return out;
}

Vec2 lattice_point(const std::vector<Vec2>& verts, const LatticeNode& ln,
                   int m, int dim) {
  Vec2 p = verts[0] * (static_cast<double>(ln.idx[0]) / m) +
           verts[1] * (static_cast<double>(ln.idx[1]) / m);
  if (dim == 2) p += verts[2] * (static_cast<double>(ln.idx[2]) / m);
  return p;
}

uint64_t ekey(int a, int b) {
  if (a > b) std::swap(a, b);
  return (static_cast<uint64_t>(a) << 32) | static_cast<uint32_t>(b);
}

// Lagrange shape polynomials for the node set on one cell
std::vector<Poly> lagrange_shapes(const SimplicialMesh& mesh, int cell,
                                  const std::vector<Vec2>& pts, int degree) {
  const int dim = mesh.dim;
  const Vec2 cen = mesh.cell_centroid(cell);
  const double h = mesh.cell_diameter(cell);
  const Poly X = (Poly::var(dim, 0) - Poly::constant(dim, cen.x)) * (1.0 / h);
  const Poly Y = dim == 2
                     ? (Poly::var(dim, 1) - Poly::constant(dim, cen.y)) *
                           (1.0 / h)
                     : Poly(dim);
  std::vector<Poly> mono;
  for (int d = 0; d <= degree; ++d)
    for (int i = d; i >= 0; --i) {
      const int j = d - i;
      if (dim == 1 && j > 0) continue;
      Poly p = Poly::constant(dim, 1.0);
      for (int k = 0; k < i; ++k) p = p * X;
      for (int k = 0; k < j; ++k) p = p * Y;
      mono.push_back(p);
    }
  const int n = static_cast<int>(mono.size());
  if (n != static_cast<int>(pts.size()))
    throw std::runtime_error("lagrange_shapes: node count mismatch");
  Eigen::MatrixXd V(n, n);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) V(a, b) = mono[b].at(pts[a]);
  const Eigen::MatrixXd W = V.inverse();  // shapes_a = sum_b W(b,a) mono_b
  std::vector<Poly> shapes(n, Poly(dim));
  for (int a = 0; a < n; ++a) {
    Poly p(dim);
    for (int b = 0; b < n; ++b)
      if (W(b, a) != 0.0) p += mono[b] * W(b, a);
    p.trim();
    shapes[a] = p;
  }
  return shapes;
}

}  // namespace

TrialSpace build_trial_space(const SimplicialMesh& mesh,
                             const DiscretizationConfig& cfg,
                             const FaceClassification& faces,
                             bool apply_inflow_constraints) {
  if (cfg.m_w < 1) throw std::invalid_argument("m_w >= 1");
  TrialSpace ts;
  ts.mesh = &mesh;
  ts.m_u = cfg.m_u;
  ts.m_w = cfg.m_w;
  ts.u_loc_dim = poly_space_dim(mesh.dim, cfg.m_u);

  const int nl = mesh.n_leaves();
  ts.u_basis.resize(nl);
  for (int li = 0; li < nl; ++li)
    ts.u_basis[li] = orthonormal_cell_basis(mesh, mesh.leaves[li], cfg.m_u);
  ts.dim_u = ts.u_loc_dim * nl;

  // global Lagrange nodes: vertices, edge lattices (keyed from the lower
  // vertex id), cell-interior lattices
  const int m = cfg.m_w;
  std::map<int, int> vert_node;
  std::map<std::pair<uint64_t, int>, int> edge_node;
  ts.cell_nodes.resize(nl);
  ts.w_shape.resize(nl);
  const auto lat = lattice(mesh.dim, m);
  for (int li = 0; li < nl; ++li) {
    const int cell = mesh.leaves[li];
    const auto verts = mesh.cell_vertices(cell);
    const auto& cv = mesh.cells[cell].v;
    std::vector<Vec2> pts;
    for (const auto& ln : lat) {
      const Vec2 p = lattice_point(verts, ln, m, mesh.dim);
      pts.push_back(p);
      // classify the lattice node
      int which_vertex = -1, zero_count = 0;
      for (int k = 0; k <= mesh.dim; ++k) {
        if (ln.idx[k] == m) which_vertex = k;
        if (ln.idx[k] == 0) ++zero_count;
      }
      int gid;
      if (which_vertex >= 0) {
        const int v = cv[which_vertex];
        auto it = vert_node.find(v);
        if (it == vert_node.end()) {
          gid = static_cast<int>(ts.nodes.size());
          ts.nodes.push_back(p);
          vert_node.emplace(v, gid);
        } else {
          gid = it->second;
        }
      } else if (mesh.dim == 2 && zero_count == 1) {
        // on the edge opposite the vertex with zero weight
        int zk = 0;
        for (int k = 0; k < 3; ++k)
          if (ln.idx[k] == 0) zk = k;
        const int a = cv[(zk + 1) % 3], b = cv[(zk + 2) % 3];
        // position along the edge measured from the lower vertex id
        const int steps_from_a = ln.idx[(zk + 2) % 3];
        const int k_from_min = (a < b) ? steps_from_a : m - steps_from_a;
        const auto key = std::make_pair(ekey(a, b), k_from_min);
        auto it = edge_node.find(key);
        if (it == edge_node.end()) {
          gid = static_cast<int>(ts.nodes.size());
          ts.nodes.push_back(p);
          edge_node.emplace(key, gid);
        } else {
          gid = it->second;
        }
      } else {
        // cell-interior (1D interior nodes included here)
        gid = static_cast<int>(ts.nodes.size());
        ts.nodes.push_back(p);
      }
      ts.cell_nodes[li].push_back(gid);
    }
    ts.w_shape[li] = lagrange_shapes(mesh, cell, pts, m);
  }

  // constrain nodes on the inflow boundary
  std::vector<bool> constrained(ts.nodes.size(), false);
  if (apply_inflow_constraints) {
    for (const auto& [li, f] : faces.inflow_boundary) {
      // lattice nodes with zero weight on the opposite vertex lie on face f
      for (size_t a = 0; a < lat.size(); ++a) {
        bool on_face;
        if (mesh.dim == 1) {
          on_face = (f == 0) ? (lat[a].idx[0] == m) : (lat[a].idx[1] == m);
        } else {
          on_face = (lat[a].idx[f] == 0);
        }
        if (on_face) constrained[ts.cell_nodes[li][a]] = true;
      }
    }
  }
  ts.node_dof.assign(ts.nodes.size(), -1);
  int dof = 0;
  for (size_t i = 0; i < ts.nodes.size(); ++i)
    if (!constrained[i]) ts.node_dof[i] = dof++;
  ts.dim_w = dof;
  return ts;
}

TestSpace build_test_space(const SimplicialMesh& fine,
                           const DiscretizationConfig& cfg) {
  TestSpace vs;
  vs.mesh = &fine;
  vs.m_v = cfg.m_v;
  vs.loc_dim = poly_space_dim(fine.dim, cfg.m_v);
  vs.basis.resize(fine.n_leaves());
  for (int li = 0; li < fine.n_leaves(); ++li)
    vs.basis[li] = orthonormal_cell_basis(fine, fine.leaves[li], cfg.m_v);
  return vs;
}

Poly TrialFunction::u_poly(int leaf_idx) const {
  const TrialSpace& s = *space;
  Poly p(s.mesh->dim);
  const int off = s.u_offset(leaf_idx);
  for (int k = 0; k < s.u_loc_dim; ++k) {
    const double c = coeffs[off + k];
    if (c != 0.0) p += s.u_basis[leaf_idx][k] * c;
  }
  p.trim();
  return p;
}

Poly TrialFunction::w_poly(int leaf_idx) const {
  const TrialSpace& s = *space;
  Poly p(s.mesh->dim);
  const auto& cn = s.cell_nodes[leaf_idx];
  for (size_t a = 0; a < cn.size(); ++a) {
    const int gi = s.w_index(cn[a]);
    if (gi < 0) continue;
    const double c = coeffs[gi];
    if (c != 0.0) p += s.w_shape[leaf_idx][a] * c;
  }
  p.trim();
  return p;
}

double TrialFunction::eval_u(int leaf_idx, const Vec2& p) const {
  return u_poly(leaf_idx).at(p);
}

double TrialFunction::eval_w(int leaf_idx, const Vec2& p) const {
  return w_poly(leaf_idx).at(p);
}

Vec2 TrialFunction::grad_w(int leaf_idx, const Vec2& p) const {
  const Poly w = w_poly(leaf_idx);
  return {w.derivative(0).at(p),
          space->mesh->dim == 2 ? w.derivative(1).at(p) : 0.0};
}

TrialFunction reexpand(const TrialFunction& fn, const TrialSpace& finer) {
  const TrialSpace& src = *fn.space;
  const SimplicialMesh& fm = *finer.mesh;
  TrialFunction out(finer);
  // u-part: L2 projection per fine cell reproduces the nested function
  for (int li = 0; li < fm.n_leaves(); ++li) {
    const int cell = fm.leaves[li];
    const int anc = fm.ancestor_leaf_in(*src.mesh, cell);
    const int src_li = src.mesh->leaf_index(anc);
    const Poly up = fn.u_poly(src_li);
    const QuadRule q =
        cell_rule(fm.dim, fm.cell_vertices(cell), 2 * finer.m_u + 2);
    const int off = finer.u_offset(li);
    for (int k = 0; k < finer.u_loc_dim; ++k)
      out.coeffs[off + k] = q.integrate(up * finer.u_basis[li][k]);
    // w-part: nodal interpolation
    const auto& cn = finer.cell_nodes[li];
    const Poly wp = fn.w_poly(src_li);
    for (int gn : cn) {
      const int gi = finer.w_index(gn);
      if (gi >= 0) out.coeffs[gi] = wp.at(finer.nodes[gn]);
    }
  }
  return out;
}

}  // namespace dpgt
