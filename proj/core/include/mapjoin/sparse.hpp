#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>
#include <vector>

namespace mapjoin {

/// Symmetric sparse matrix stored as its lower triangle. Used for the
/// information matrices attached to maps and for joint normal matrices.
class SparseSymMatrix {
 public:
  SparseSymMatrix() = default;
  explicit SparseSymMatrix(int dim) : lower_(dim, dim) {}

  /// Builds from (row, col, value) triplets; entries above the diagonal are
  /// folded onto the lower triangle, duplicates are summed.
  static SparseSymMatrix from_triplets(int dim, const std::vector<Eigen::Triplet<double>>& ts);

  /// Wraps an already lower-triangular sparse matrix.
  static SparseSymMatrix from_lower(Eigen::SparseMatrix<double> lower);

  /// Keeps the lower triangle of an (approximately) symmetric matrix.
  static SparseSymMatrix from_full(const Eigen::SparseMatrix<double>& full);

  static SparseSymMatrix from_dense(const Eigen::MatrixXd& dense);

  static SparseSymMatrix identity(int dim);

  int dim() const { return static_cast<int>(lower_.rows()); }

  const Eigen::SparseMatrix<double>& lower() const { return lower_; }

  /// Fully populated symmetric sparse matrix.
  Eigen::SparseMatrix<double> full() const;

  Eigen::MatrixXd dense() const;

  Eigen::VectorXd apply(const Eigen::VectorXd& x) const;

  /// x^T M x.
  double quadratic(const Eigen::VectorXd& x) const { return x.dot(apply(x)); }

  double trace() const;

  /// Positive semidefiniteness test: Cholesky succeeds after adding a ridge
  /// of ridge_scale * trace / dim to the diagonal.
  bool is_psd(double ridge_scale = 1e-12) const;

  std::vector<Eigen::Triplet<double>> lower_triplets() const;

  /// Congruence transform g^T M g for a sparse g with rows matching dim().
  SparseSymMatrix congruence(const Eigen::SparseMatrix<double>& g) const;

  /// Row/column permutation: out(i, j) = (*this)(perm[i], perm[j]).
  SparseSymMatrix permuted(const std::vector<int>& perm) const;

 private:
  Eigen::SparseMatrix<double> lower_;
};

/// Solves M x = b for symmetric positive definite M with a sparse Cholesky
/// factorization under an approximate-minimum-degree ordering. Throws
/// SingularSystemError when the factorization fails.
Eigen::VectorXd solve_spd(const SparseSymMatrix& m, const Eigen::VectorXd& b);

}  // namespace mapjoin
