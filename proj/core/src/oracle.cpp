#include "mapjoin/oracle.hpp"

#include <Eigen/Cholesky>
#include <Eigen/SparseCholesky>
#include <cmath>

#include "mapjoin/angle.hpp"
#include "mapjoin/errors.hpp"
#include "mapjoin/transform.hpp"

namespace mapjoin {

namespace {

/// Residual of one map against the global state: the global entities
/// re-expressed in the map's frame, minus the map's estimate, in the map's
/// layout. Optionally with the Jacobian against the global state.
struct MapResidual {
  Eigen::VectorXd r;
  Eigen::SparseMatrix<double> j;
};

MapResidual map_residual(const LocalMap& global, const LocalMap& map, bool with_jacobian) {
  const FrameChange fc = change_frame(global, map.frame, with_jacobian);
  const int td = trans_dim(map.dim);
  const int rd = map.translation_only ? 0 : rot_dim(map.dim);

  MapResidual out;
  out.r.resize(map.estimate.dim());
  std::vector<int> row_map(fc.state.dim(), -1);  // frame-change row -> residual row
  for (const auto& e : map.estimate.entries()) {
    const auto& h = fc.state.entry(e.key);  // throws MissingEntityError
    if (h.dim != e.dim) {
      throw InvalidInputError("oracle: block dimension mismatch for a shared entity");
    }
    const Eigen::VectorXd diff =
        fc.state.values().segment(h.offset, h.dim) - map.estimate.values().segment(e.offset, e.dim);
    out.r.segment(e.offset, e.dim) = diff;
    if (e.key.kind == EntityKind::Pose && rd > 0) {
      for (int k = 0; k < rd; ++k) {
        out.r[e.offset + td + k] = wrap_angle(diff[td + k]);
      }
    }
    for (int i = 0; i < e.dim; ++i) {
      row_map[h.offset + i] = e.offset + i;
    }
  }
  if (with_jacobian) {
    std::vector<Eigen::Triplet<double>> jt;
    jt.reserve(fc.jacobian.nonZeros());
    for (int k = 0; k < fc.jacobian.outerSize(); ++k) {
      for (Eigen::SparseMatrix<double>::InnerIterator it(fc.jacobian, k); it; ++it) {
        const int row = row_map[it.row()];
        if (row >= 0) {
          jt.emplace_back(row, static_cast<int>(it.col()), it.value());
        }
      }
    }
    out.j.resize(map.estimate.dim(), global.estimate.dim());
    out.j.setFromTriplets(jt.begin(), jt.end());
  }
  return out;
}

double objective_at(const LocalMap& global, const std::vector<LocalMap>& maps) {
  double obj = 0.0;
  for (const auto& m : maps) {
    const MapResidual mr = map_residual(global, m, false);
    obj += mr.r.dot(m.info.apply(mr.r));
  }
  return obj;
}

void wrap_pose_angles(LocalMap& m) {
  if (m.translation_only) {
    return;
  }
  const int td = trans_dim(m.dim);
  const int rd = rot_dim(m.dim);
  for (const auto& e : m.estimate.entries()) {
    if (e.key.kind == EntityKind::Pose) {
      for (int k = 0; k < rd; ++k) {
        m.estimate.values()[e.offset + td + k] = wrap_angle(m.estimate.values()[e.offset + td + k]);
      }
    }
  }
}

}  // namespace

double integrated_objective(const LocalMap& global, const std::vector<LocalMap>& maps) {
  return objective_at(global, maps);
}

OracleReport full_nonlinear_ls(const std::vector<LocalMap>& maps, const LocalMap& init,
                               const GaussNewtonConfig& cfg) {
  cfg.validate();
  if (maps.empty()) {
    throw InvalidInputError("full_nonlinear_ls: no maps");
  }

  LocalMap global = canonicalize(init);
  wrap_pose_angles(global);
  const int dim = global.estimate.dim();

  double obj = objective_at(global, maps);
  bool converged = false;
  int iters = 0;

  Eigen::SparseMatrix<double> n(dim, dim);
  Eigen::VectorXd g(dim);

  auto assemble = [&](const LocalMap& at) {
    n.setZero();
    g.setZero();
    for (const auto& m : maps) {
      const MapResidual mr = map_residual(at, m, true);
      const Eigen::SparseMatrix<double> wj = m.info.full() * mr.j;
      n += Eigen::SparseMatrix<double>(mr.j.transpose() * wj);
      g += mr.j.transpose() * (m.info.apply(mr.r));
    }
  };

  while (iters < cfg.max_iters) {
    assemble(global);

    Eigen::VectorXd delta;
    if (dim < 500) {
      const Eigen::MatrixXd nd(n);
      Eigen::LDLT<Eigen::MatrixXd> ldlt(nd);
      if (ldlt.info() != Eigen::Success) {
        throw SingularSystemError("full_nonlinear_ls: normal equations not solvable");
      }
      delta = ldlt.solve(-g);
    } else {
      Eigen::SimplicialLLT<Eigen::SparseMatrix<double>, Eigen::Lower, Eigen::AMDOrdering<int>> llt(
          n);
      if (llt.info() != Eigen::Success) {
        throw SingularSystemError("full_nonlinear_ls: normal equations not positive definite");
      }
      delta = llt.solve(-g);
    }
    if (delta.lpNorm<Eigen::Infinity>() < cfg.step_tol) {
      converged = true;
      break;
    }

    double alpha = 1.0;
    bool accepted = false;
    LocalMap cand = global;
    double objn = obj;
    for (int h = 0; h <= 10; ++h) {
      cand.estimate.values() = global.estimate.values() + alpha * delta;
      wrap_pose_angles(cand);
      objn = objective_at(cand, maps);
      if (objn <= obj) {
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted) {
      break;
    }
    ++iters;
    const double decrease = obj - objn;
    global = std::move(cand);
    obj = objn;
    if (decrease <= cfg.rel_tol * std::max(1.0, obj)) {
      converged = true;
      break;
    }
  }

  assemble(global);
  global.info = SparseSymMatrix::from_full(n);

  OracleReport rep;
  rep.solution = std::move(global);
  rep.final_objective = obj;
  rep.iterations = iters;
  rep.converged = converged;
  return rep;
}

OracleReport nonlinear_join(const LocalMap& m1, const LocalMap& m2, const StateVector& init,
                            const FrameDescriptor& target_frame, const GaussNewtonConfig& cfg) {
  LocalMap start;
  start.dim = m1.dim;
  start.translation_only = m1.translation_only;
  start.frame = target_frame;
  start.estimate = init;
  start.info = SparseSymMatrix(init.dim());
  return full_nonlinear_ls({m1, m2}, start, cfg);
}

}  // namespace mapjoin
