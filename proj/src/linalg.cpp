#include "dpgt/linalg.hpp"

#include <cmath>
#include <map>
#include <sstream>
#include <stdexcept>

namespace dpgt {

void BlockDiagonal::add_block(const Eigen::MatrixXd& a) {
  if (a.rows() != a.cols()) throw std::invalid_argument("block not square");
  const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
  if (((a - a.transpose()).cwiseAbs().maxCoeff()) > 1e-13 * scale) {
    std::ostringstream os;
    os << "block " << blocks_.size() << " not symmetric";
    throw std::invalid_argument(os.str());
  }
  offsets_.push_back(dim_);
  dim_ += static_cast<int>(a.rows());
  blocks_.push_back(a);
  factored_ = false;
}

void BlockDiagonal::factor() {
  llt_.clear();
  llt_.reserve(blocks_.size());
  for (size_t b = 0; b < blocks_.size(); ++b) {
    llt_.emplace_back(blocks_[b]);
    if (llt_.back().info() != Eigen::Success) {
      std::ostringstream os;
      os << "block " << b << " not SPD";
      throw std::runtime_error(os.str());
    }
  }
  factored_ = true;
}

Eigen::VectorXd BlockDiagonal::apply(const Eigen::VectorXd& v) const {
  if (v.size() != dim_) throw std::invalid_argument("apply: size mismatch");
  Eigen::VectorXd r(dim_);
  for (size_t b = 0; b < blocks_.size(); ++b) {
    const int o = offsets_[b];
    const int s = static_cast<int>(blocks_[b].rows());
    r.segment(o, s) = blocks_[b] * v.segment(o, s);
  }
  return r;
}

Eigen::VectorXd BlockDiagonal::solve(const Eigen::VectorXd& v) const {
  if (!factored_) throw std::runtime_error("solve before factor()");
  if (v.size() != dim_) throw std::invalid_argument("solve: size mismatch");
  Eigen::VectorXd r(dim_);
  for (size_t b = 0; b < blocks_.size(); ++b) {
    const int o = offsets_[b];
    const int s = static_cast<int>(blocks_[b].rows());
    r.segment(o, s) = llt_[b].solve(v.segment(o, s));
  }
  return r;
}

Eigen::VectorXd BlockDiagonal::solve_block(int b,
                                           const Eigen::VectorXd& local) const {
  if (!factored_) throw std::runtime_error("solve before factor()");
  return llt_[b].solve(local);
}

Eigen::MatrixXd BlockDiagonal::solve_block_columns(
    int b, const Eigen::MatrixXd& l) const {
  if (!factored_) throw std::runtime_error("solve before factor()");
  return llt_[b].solve(l);
}

Eigen::VectorXd cg_solve(const SpMat& s, const Eigen::VectorXd& rhs,
                         double tol, int maxit) {
  const int n = static_cast<int>(s.rows());
  Eigen::VectorXd diag(n);
  for (int i = 0; i < n; ++i) {
    const double d = s.coeff(i, i);
    diag[i] = (d > 0.0) ? 1.0 / d : 1.0;
  }
  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd r = rhs;
  const double rhs_norm = rhs.norm();
  if (rhs_norm == 0.0) return x;
  Eigen::VectorXd z = diag.asDiagonal() * r;
  Eigen::VectorXd p = z;
  double rz = r.dot(z);
  for (int it = 0; it < maxit; ++it) {
    if (r.norm() <= tol * rhs_norm) return x;
    const Eigen::VectorXd sp = s * p;
    const double alpha = rz / p.dot(sp);
    x += alpha * p;
    r -= alpha * sp;
    z = diag.asDiagonal() * r;
    const double rz_new = r.dot(z);
    p = z + (rz_new / rz) * p;
    rz = rz_new;
  }
  if (r.norm() <= tol * rhs_norm) return x;
  std::ostringstream os;
  os << "cg_solve: no convergence in " << maxit
     << " iterations, residual " << r.norm() / rhs_norm;
  throw std::runtime_error(os.str());
}

SpMat normal_matrix(const SpMat& b, const BlockDiagonal& g) {
  if (!g.factored()) throw std::runtime_error("normal_matrix: factor G first");
  // W = G^{-1} B, built block-row-wise over the columns each block touches
  std::vector<int> row_block(b.rows());
  for (int blk = 0; blk < g.n_blocks(); ++blk)
    for (int r = 0; r < g.block_size(blk); ++r)
      row_block[g.block_offset(blk) + r] = blk;
  // (local row, column, value) per block, gathered in one pass
  std::vector<std::vector<std::tuple<int, int, double>>> entries(
      g.n_blocks());
  for (int c = 0; c < b.outerSize(); ++c)
    for (SpMat::InnerIterator it(b, c); it; ++it) {
      const int blk = row_block[it.row()];
      entries[blk].emplace_back(
          static_cast<int>(it.row()) - g.block_offset(blk), c, it.value());
    }
  std::vector<Eigen::Triplet<double>> trips;
  for (int blk = 0; blk < g.n_blocks(); ++blk) {
    if (entries[blk].empty()) continue;
    std::map<int, int> cols;
    for (const auto& [r, c, v] : entries[blk]) cols.emplace(c, 0);
    int k = 0;
    for (auto& [c, idx] : cols) idx = k++;
    const int s = g.block_size(blk);
    Eigen::MatrixXd local = Eigen::MatrixXd::Zero(s, k);
    for (const auto& [r, c, v] : entries[blk]) local(r, cols[c]) = v;
    const Eigen::MatrixXd w = g.solve_block_columns(blk, local);
    const int o = g.block_offset(blk);
    for (const auto& [c, idx] : cols)
      for (int r = 0; r < s; ++r)
        if (w(r, idx) != 0.0) trips.emplace_back(o + r, c, w(r, idx));
  }
  SpMat winv(b.rows(), b.cols());
  winv.setFromTriplets(trips.begin(), trips.end());
  SpMat result = SpMat(b.transpose()) * winv;
  result.prune(0.0);
  // symmetrize rounding noise
  SpMat sym = 0.5 * (result + SpMat(result.transpose()));
  return sym;
}

Eigen::VectorXd solve_spd(const SpMat& s, const Eigen::VectorXd& rhs,
                          double tol, int dense_limit) {
  const int n = static_cast<int>(s.rows());
  if (n <= dense_limit) {
    const Eigen::MatrixXd dense(s);
    Eigen::LLT<Eigen::MatrixXd> llt(dense);
    if (llt.info() == Eigen::Success) {
      Eigen::VectorXd x = llt.solve(rhs);
      // one refinement step keeps the identity-level checks tight
      x += llt.solve(rhs - dense * x);
      return x;
    }
    Eigen::LDLT<Eigen::MatrixXd> ldlt(dense);
    if (ldlt.info() == Eigen::Success) return ldlt.solve(rhs);
    throw std::runtime_error("solve_spd: dense factorization failed");
  }
  return cg_solve(s, rhs, tol, 40 * n);
}

}  // namespace dpgt
