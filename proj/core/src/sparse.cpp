#include "mapjoin/sparse.hpp"

#include <Eigen/SparseCholesky>
#include <cmath>

#include "mapjoin/errors.hpp"

namespace mapjoin {

namespace {
using SpMat = Eigen::SparseMatrix<double>;
using Llt = Eigen::SimplicialLLT<SpMat, Eigen::Lower, Eigen::AMDOrdering<int>>;
}  // namespace

SparseSymMatrix SparseSymMatrix::from_triplets(int dim,
                                               const std::vector<Eigen::Triplet<double>>& ts) {
  std::vector<Eigen::Triplet<double>> low;
  low.reserve(ts.size());
  for (const auto& t : ts) {
    if (t.row() < 0 || t.col() < 0 || t.row() >= dim || t.col() >= dim) {
      throw InvalidInputError("SparseSymMatrix: triplet index out of range");
    }
    if (t.row() >= t.col()) {
      low.emplace_back(t.row(), t.col(), t.value());
    } else {
      low.emplace_back(t.col(), t.row(), t.value());
    }
  }
  SparseSymMatrix m(dim);
  m.lower_.setFromTriplets(low.begin(), low.end());
  m.lower_.prune(0.0);
  return m;
}

SparseSymMatrix SparseSymMatrix::from_lower(SpMat lower) {
  SparseSymMatrix m;
  m.lower_ = std::move(lower);
  return m;
}

SparseSymMatrix SparseSymMatrix::from_full(const SpMat& full) {
  SparseSymMatrix m;
  m.lower_ = full.triangularView<Eigen::Lower>();
  m.lower_.prune(0.0);
  return m;
}

SparseSymMatrix SparseSymMatrix::from_dense(const Eigen::MatrixXd& dense) {
  std::vector<Eigen::Triplet<double>> ts;
  for (int j = 0; j < dense.cols(); ++j) {
    for (int i = j; i < dense.rows(); ++i) {
      if (dense(i, j) != 0.0) {
        ts.emplace_back(i, j, dense(i, j));
      }
    }
  }
  return from_triplets(static_cast<int>(dense.rows()), ts);
}

SparseSymMatrix SparseSymMatrix::identity(int dim) {
  SpMat id(dim, dim);
  id.setIdentity();
  return from_lower(std::move(id));
}

SpMat SparseSymMatrix::full() const {
  SpMat f = lower_.selfadjointView<Eigen::Lower>();
  return f;
}

Eigen::MatrixXd SparseSymMatrix::dense() const {
  return Eigen::MatrixXd(lower_).selfadjointView<Eigen::Lower>();
}

Eigen::VectorXd SparseSymMatrix::apply(const Eigen::VectorXd& x) const {
  return lower_.selfadjointView<Eigen::Lower>() * x;
}

double SparseSymMatrix::trace() const {
  double t = 0.0;
  for (int i = 0; i < dim(); ++i) {
    t += lower_.coeff(i, i);
  }
  return t;
}

bool SparseSymMatrix::is_psd(double ridge_scale) const {
  if (dim() == 0) {
    return true;
  }
  const double ridge = ridge_scale * std::abs(trace()) / dim();
  SpMat ridged = full();
  SpMat id(dim(), dim());
  id.setIdentity();
  ridged += (ridge > 0.0 ? ridge : ridge_scale) * id;
  Llt llt(ridged);
  return llt.info() == Eigen::Success;
}

std::vector<Eigen::Triplet<double>> SparseSymMatrix::lower_triplets() const {
  std::vector<Eigen::Triplet<double>> ts;
  ts.reserve(lower_.nonZeros());
  for (int k = 0; k < lower_.outerSize(); ++k) {
    for (SpMat::InnerIterator it(lower_, k); it; ++it) {
      ts.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
    }
  }
  return ts;
}

SparseSymMatrix SparseSymMatrix::congruence(const SpMat& g) const {
  if (g.rows() != dim()) {
    throw InvalidInputError("SparseSymMatrix::congruence: row count mismatch");
  }
  SpMat f = full();
  SpMat prod = g.transpose() * f * g;
  return from_full(prod);
}

SparseSymMatrix SparseSymMatrix::permuted(const std::vector<int>& perm) const {
  if (static_cast<int>(perm.size()) != dim()) {
    throw InvalidInputError("SparseSymMatrix::permuted: permutation size mismatch");
  }
  // out(i, j) = this(perm[i], perm[j]); build the inverse scalar map.
  std::vector<int> inv(perm.size());
  for (std::size_t i = 0; i < perm.size(); ++i) {
    inv[perm[i]] = static_cast<int>(i);
  }
  std::vector<Eigen::Triplet<double>> ts;
  for (const auto& t : lower_triplets()) {
    ts.emplace_back(inv[t.row()], inv[t.col()], t.value());
  }
  return from_triplets(dim(), ts);
}

Eigen::VectorXd solve_spd(const SparseSymMatrix& m, const Eigen::VectorXd& b) {
  if (b.size() != m.dim()) {
    throw InvalidInputError("solve_spd: dimension mismatch");
  }
  Llt llt(m.full());
  if (llt.info() != Eigen::Success) {
    throw SingularSystemError("solve_spd: Cholesky factorization failed");
  }
  return llt.solve(b);
}

}  // namespace mapjoin
