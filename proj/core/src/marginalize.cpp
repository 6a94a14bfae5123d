#include "mapjoin/marginalize.hpp"

#include <Eigen/Cholesky>
#include <Eigen/SparseCholesky>
#include <set>

#include "mapjoin/errors.hpp"

namespace mapjoin {

LocalMap marginalize(const LocalMap& m, const std::vector<StateKey>& remove) {
  if (remove.empty()) {
    return m;
  }
  std::set<StateKey> rm(remove.begin(), remove.end());
  for (StateKey k : rm) {
    m.estimate.entry(k);  // throws MissingEntityError when absent
  }
  if (static_cast<int>(rm.size()) == m.estimate.size()) {
    throw InvalidInputError("marginalize: nothing would remain");
  }

  std::vector<int> keep_idx, rem_idx;
  StateVector kept;
  for (const auto& e : m.estimate.entries()) {
    const bool removed = rm.count(e.key) > 0;
    for (int i = 0; i < e.dim; ++i) {
      (removed ? rem_idx : keep_idx).push_back(e.offset + i);
    }
    if (!removed) {
      kept.add(e.key, m.estimate.values().segment(e.offset, e.dim));
    }
  }

  const Eigen::SparseMatrix<double> full = m.info.full();
  const int nk = static_cast<int>(keep_idx.size());
  const int nr = static_cast<int>(rem_idx.size());

  // Gather the partitioned blocks. I_kr is usually thin, so dense columns
  // are fine; I_rr is factorized sparsely above 64 dims.
  Eigen::MatrixXd i_rk(nr, nk);
  for (int c = 0; c < nk; ++c) {
    for (int r = 0; r < nr; ++r) {
      i_rk(r, c) = full.coeff(rem_idx[r], keep_idx[c]);
    }
  }

  Eigen::MatrixXd sol;  // I_rr^-1 I_rk
  if (nr < 64) {
    Eigen::MatrixXd i_rr(nr, nr);
    for (int r = 0; r < nr; ++r) {
      for (int c = 0; c < nr; ++c) {
        i_rr(r, c) = full.coeff(rem_idx[r], rem_idx[c]);
      }
    }
    Eigen::LLT<Eigen::MatrixXd> llt(i_rr);
    if (llt.info() != Eigen::Success) {
      throw SingularMarginalizationError("marginalize: removed block is not positive definite");
    }
    sol = llt.solve(i_rk);
  } else {
    std::vector<int> pos(full.rows(), -1);
    for (int r = 0; r < nr; ++r) {
      pos[rem_idx[r]] = r;
    }
    std::vector<Eigen::Triplet<double>> ts;
    for (int r = 0; r < nr; ++r) {
      for (Eigen::SparseMatrix<double>::InnerIterator it(full, rem_idx[r]); it; ++it) {
        const int rr = pos[it.row()];
        if (rr >= 0) {
          ts.emplace_back(rr, r, it.value());
        }
      }
    }
    Eigen::SparseMatrix<double> i_rr(nr, nr);
    i_rr.setFromTriplets(ts.begin(), ts.end());
    Eigen::SimplicialLLT<Eigen::SparseMatrix<double>, Eigen::Lower, Eigen::AMDOrdering<int>> llt(
        i_rr);
    if (llt.info() != Eigen::Success) {
      throw SingularMarginalizationError("marginalize: removed block is not positive definite");
    }
    sol = llt.solve(i_rk);
  }

  Eigen::MatrixXd i_kk(nk, nk);
  for (int c = 0; c < nk; ++c) {
    for (int r = 0; r < nk; ++r) {
      i_kk(r, c) = full.coeff(keep_idx[r], keep_idx[c]);
    }
  }
  Eigen::MatrixXd schur = i_kk - i_rk.transpose() * sol;
  schur = 0.5 * (schur + schur.transpose().eval());

  LocalMap out;
  out.dim = m.dim;
  out.translation_only = m.translation_only;
  out.frame = m.frame;
  out.estimate = std::move(kept);
  out.info = SparseSymMatrix::from_dense(schur);
  return out;
}

LocalMap marginalize_poses(const LocalMap& m) {
  std::vector<StateKey> rm;
  for (const auto& e : m.estimate.entries()) {
    if (e.key.kind == EntityKind::Pose) {
      rm.push_back(e.key);
    }
  }
  return marginalize(m, rm);
}

}  // namespace mapjoin
