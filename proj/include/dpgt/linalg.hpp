#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <vector>

namespace dpgt {

using SpMat = Eigen::SparseMatrix<double>;

// Block-diagonal SPD operator (one dense block per fine cell) with its
// Cholesky factors.
class BlockDiagonal {
 public:
  // validates symmetry to 1e-13 relative
  void add_block(const Eigen::MatrixXd& a);
  void factor();  // throws with the block id if a block is not SPD
  bool factored() const { return factored_; }

  int dim() const { return dim_; }
  int n_blocks() const { return static_cast<int>(blocks_.size()); }
  int block_offset(int b) const { return offsets_[b]; }
  int block_size(int b) const {
    return static_cast<int>(blocks_[b].rows());
  }
  const Eigen::MatrixXd& block(int b) const { return blocks_[b]; }

  Eigen::VectorXd apply(const Eigen::VectorXd& v) const;
  Eigen::VectorXd solve(const Eigen::VectorXd& v) const;
  Eigen::VectorXd solve_block(int b, const Eigen::VectorXd& local) const;
  Eigen::MatrixXd solve_block_columns(int b, const Eigen::MatrixXd& l) const;

 private:
  int dim_ = 0;
  bool factored_ = false;
  std::vector<int> offsets_;
  std::vector<Eigen::MatrixXd> blocks_;
  std::vector<Eigen::LLT<Eigen::MatrixXd>> llt_;
};

// diagonally preconditioned conjugate gradients; throws (with the achieved
// residual in the message) when maxit is exceeded
Eigen::VectorXd cg_solve(const SpMat& s, const Eigen::VectorXd& rhs,
                         double tol, int maxit);

// S = B^T G^{-1} B
SpMat normal_matrix(const SpMat& b, const BlockDiagonal& g);

// dense Cholesky below dense_limit, CG above
Eigen::VectorXd solve_spd(const SpMat& s, const Eigen::VectorXd& rhs,
                          double tol, int dense_limit);

}  // namespace dpgt
