#include "mapjoin/build.hpp"

#include <Eigen/SparseCholesky>
#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>
#include <set>

#include "mapjoin/angle.hpp"
#include "mapjoin/errors.hpp"
#include "mapjoin/rotation.hpp"
#include "mapjoin/transform.hpp"

namespace mapjoin {

std::vector<int> RawLocalData::feature_ids() const {
  std::set<int> ids;
  for (const auto& o : observations) {
    ids.insert(o.feature);
  }
  return {ids.begin(), ids.end()};
}

void GaussNewtonConfig::validate() const {
  if (max_iters < 1) {
    throw InvalidInputError("GaussNewtonConfig: max_iters must be >= 1");
  }
  if (!(rel_tol > 0.0) || !(step_tol > 0.0)) {
    throw InvalidInputError("GaussNewtonConfig: tolerances must be positive");
  }
}

namespace {

struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int a) { return parent[a] == a ? a : parent[a] = find(parent[a]); }
  void unite(int a, int b) { parent[find(a)] = find(b); }
};

void check_raw(const RawLocalData& data) {
  if (data.pose_ids.empty()) {
    throw InvalidInputError("build_local_map: no poses");
  }
  if (!std::is_sorted(data.pose_ids.begin(), data.pose_ids.end()) ||
      std::adjacent_find(data.pose_ids.begin(), data.pose_ids.end()) != data.pose_ids.end()) {
    throw InvalidInputError("build_local_map: pose ids must be ascending and unique");
  }

  std::unordered_map<int, int> pose_idx;
  for (std::size_t i = 0; i < data.pose_ids.size(); ++i) {
    pose_idx[data.pose_ids[i]] = static_cast<int>(i);
  }
  const std::vector<int> feats = data.feature_ids();
  std::unordered_map<int, int> feat_idx;
  for (std::size_t i = 0; i < feats.size(); ++i) {
    feat_idx[feats[i]] = static_cast<int>(data.pose_ids.size() + i);
  }

  const int n = static_cast<int>(data.pose_ids.size() + feats.size());
  UnionFind uf(n);
  const int td = trans_dim(data.dim);
  const int md = td + (data.translation_only ? 0 : rot_dim(data.dim));
  for (const auto& e : data.odometry) {
    if (!pose_idx.count(e.from) || !pose_idx.count(e.to)) {
      throw InvalidInputError("build_local_map: odometry references undeclared pose");
    }
    if (e.meas.size() != md || e.info.rows() != md || e.info.cols() != md) {
      throw InvalidInputError("build_local_map: odometry block dimension mismatch");
    }
    uf.unite(pose_idx[e.from], pose_idx[e.to]);
  }
  for (const auto& o : data.observations) {
    if (!pose_idx.count(o.pose)) {
      throw InvalidInputError("build_local_map: observation references undeclared pose");
    }
    if (o.meas.size() != td || o.info.rows() != td || o.info.cols() != td) {
      throw InvalidInputError("build_local_map: observation block dimension mismatch");
    }
    uf.unite(pose_idx[o.pose], feat_idx[o.feature]);
  }
  const int root = uf.find(0);
  for (int i = 1; i < n; ++i) {
    if (uf.find(i) != root) {
      throw InvalidInputError("build_local_map: data graph is disconnected");
    }
  }
}

/// Gauss-Newton working state for one chunk, with the gauge pose pinned to
/// the identity and excluded from the variables.
class ChunkProblem {
 public:
  ChunkProblem(const RawLocalData& data, int gauge_pose)
      : data_(data),
        gauge_(gauge_pose),
        td_(trans_dim(data.dim)),
        rd_(data.translation_only ? 0 : rot_dim(data.dim)) {
    for (int id : data.pose_ids) {
      if (id != gauge_) {
        layout_.add(pose_key(id), Eigen::VectorXd::Zero(td_ + rd_));
      }
    }
    for (int id : data.feature_ids()) {
      layout_.add(feature_key(id), Eigen::VectorXd::Zero(td_));
    }
    x_ = layout_.values();
  }

  const StateVector& layout() const { return layout_; }
  const Eigen::VectorXd& x() const { return x_; }

  void dead_reckon() {
    // Adjacency over odometry, traversable in both directions.
    std::unordered_map<int, std::vector<std::pair<int, bool>>> adj;  // pose -> (edge, fwd)
    for (std::size_t i = 0; i < data_.odometry.size(); ++i) {
      adj[data_.odometry[i].from].emplace_back(static_cast<int>(i), true);
      adj[data_.odometry[i].to].emplace_back(static_cast<int>(i), false);
    }

    std::unordered_map<int, Eigen::VectorXd> t;
    std::unordered_map<int, Eigen::MatrixXd> m;
    t[gauge_] = Eigen::VectorXd::Zero(td_);
    m[gauge_] = Eigen::MatrixXd::Identity(td_, td_);

    std::deque<int> queue{gauge_};
    while (!queue.empty()) {
      const int a = queue.front();
      queue.pop_front();
      for (auto [ei, fwd] : adj[a]) {
        const auto& e = data_.odometry[ei];
        const int b = fwd ? e.to : e.from;
        if (t.count(b)) {
          continue;
        }
        const Eigen::VectorXd zt = e.meas.head(td_);
        Eigen::MatrixXd rz = Eigen::MatrixXd::Identity(td_, td_);
        if (rd_ > 0) {
          rz = rot_from_angles(e.meas.tail(rd_));
        }
        if (fwd) {
          m[b] = rz * m[a];
          t[b] = t[a] + m[a].transpose() * zt;
        } else {
          m[b] = rz.transpose() * m[a];
          t[b] = t[a] - m[b].transpose() * zt;
        }
        queue.push_back(b);
      }
    }

    for (int id : data_.pose_ids) {
      if (id == gauge_) {
        continue;
      }
      const auto& e = layout_.entry(pose_key(id));
      x_.segment(e.offset, td_) = t.at(id);
      if (rd_ > 0) {
        x_.segment(e.offset + td_, rd_) = angles_from_rot(m.at(id));
      }
    }
    for (const auto& o : data_.observations) {
      const auto& e = layout_.entry(feature_key(o.feature));
      if (init_feat_.insert(o.feature).second) {
        x_.segment(e.offset, td_) = t.at(o.pose) + m.at(o.pose).transpose() * o.meas;
      }
    }
  }

  struct PoseEval {
    Eigen::VectorXd t;
    Eigen::MatrixXd m;
    Eigen::VectorXd ang;
    int offset = -1;  // -1 for the gauge pose
  };

  PoseEval eval_pose(const Eigen::VectorXd& x, int id) const {
    PoseEval p;
    if (id == gauge_) {
      p.t = Eigen::VectorXd::Zero(td_);
      p.m = Eigen::MatrixXd::Identity(td_, td_);
      p.ang = Eigen::VectorXd::Zero(rd_);
      return p;
    }
    const auto& e = layout_.entry(pose_key(id));
    p.offset = e.offset;
    p.t = x.segment(e.offset, td_);
    if (rd_ > 0) {
      p.ang = x.segment(e.offset + td_, rd_);
      p.m = rot_from_angles(p.ang);
    } else {
      p.m = Eigen::MatrixXd::Identity(td_, td_);
    }
    return p;
  }

  double objective(const Eigen::VectorXd& x) const {
    double obj = 0.0;
    for (const auto& e : data_.odometry) {
      const Eigen::VectorXd r = residual_odo(x, e);
      obj += r.dot(e.info * r);
    }
    for (const auto& o : data_.observations) {
      const Eigen::VectorXd r = residual_obs(x, o);
      obj += r.dot(o.info * r);
    }
    return obj;
  }

  Eigen::VectorXd residual_odo(const Eigen::VectorXd& x, const OdometryEdge& e) const {
    const PoseEval a = eval_pose(x, e.from);
    const PoseEval b = eval_pose(x, e.to);
    Eigen::VectorXd r(td_ + rd_);
    r.head(td_) = a.m * (b.t - a.t) - e.meas.head(td_);
    if (rd_ > 0) {
      const Eigen::VectorXd rel = angles_from_rot(Eigen::MatrixXd(b.m * a.m.transpose()));
      for (int k = 0; k < rd_; ++k) {
        r[td_ + k] = wrap_angle(rel[k] - e.meas[td_ + k]);
      }
    }
    return r;
  }

  Eigen::VectorXd residual_obs(const Eigen::VectorXd& x, const ObservationEdge& o) const {
    const PoseEval a = eval_pose(x, o.pose);
    const auto& f = layout_.entry(feature_key(o.feature));
    return a.m * (x.segment(f.offset, td_) - a.t) - o.meas;
  }

  /// Accumulates the weighted normal equations at x.
  void assemble(const Eigen::VectorXd& x, Eigen::SparseMatrix<double>& n,
                Eigen::VectorXd& g) const {
    std::vector<Eigen::Triplet<double>> ts;
    g = Eigen::VectorXd::Zero(x.size());

    // One term couples at most two entities; gather dense blocks per term.
    auto add_term = [&](const Eigen::VectorXd& r, const Eigen::MatrixXd& w,
                        const std::vector<std::pair<int, Eigen::MatrixXd>>& jblocks) {
      for (const auto& [oi, ji] : jblocks) {
        g.segment(oi, ji.cols()) += ji.transpose() * w * r;
        for (const auto& [oj, jj] : jblocks) {
          const Eigen::MatrixXd h = ji.transpose() * w * jj;
          for (int c = 0; c < h.cols(); ++c) {
            for (int rr = 0; rr < h.rows(); ++rr) {
              if (h(rr, c) != 0.0) {
                ts.emplace_back(oi + rr, oj + c, h(rr, c));
              }
            }
          }
        }
      }
    };

    for (const auto& e : data_.odometry) {
      const PoseEval a = eval_pose(x, e.from);
      const PoseEval b = eval_pose(x, e.to);
      const Eigen::VectorXd r = residual_odo(x, e);
      std::vector<std::pair<int, Eigen::MatrixXd>> jb;
      const int bd = td_ + rd_;
      if (a.offset >= 0) {
        Eigen::MatrixXd j = Eigen::MatrixXd::Zero(bd, bd);
        j.topLeftCorner(td_, td_) = -a.m;
        if (rd_ > 0) {
          const Eigen::VectorXd d = b.t - a.t;
          if (data_.dim == Dimension::D2) {
            j.block(0, td_, td_, 1) = drot2(a.ang[0]) * d;
            j(td_, td_) = -1.0;
          } else {
            const Eigen::Matrix3d mrel = b.m * a.m.transpose();
            const Eigen::Matrix<double, 3, 9> dang = dangles_drot3(mrel);
            for (int k = 0; k < 3; ++k) {
              const Eigen::Matrix3d dm = drot3(a.ang, k);
              j.block(0, td_ + k, td_, 1) = dm * d;
              j.block(td_, td_ + k, 3, 1) = dang * vec3x3(b.m * dm.transpose());
            }
          }
        }
        jb.emplace_back(a.offset, j);
      }
      if (b.offset >= 0) {
        Eigen::MatrixXd j = Eigen::MatrixXd::Zero(bd, bd);
        j.topLeftCorner(td_, td_) = a.m;
        if (rd_ > 0) {
          if (data_.dim == Dimension::D2) {
            j(td_, td_) = 1.0;
          } else {
            const Eigen::Matrix3d mrel = b.m * a.m.transpose();
            const Eigen::Matrix<double, 3, 9> dang = dangles_drot3(mrel);
            for (int k = 0; k < 3; ++k) {
              j.block(td_, td_ + k, 3, 1) = dang * vec3x3(drot3(b.ang, k) * a.m.transpose());
            }
          }
        }
        jb.emplace_back(b.offset, j);
      }
      add_term(r, e.info, jb);
    }

    for (const auto& o : data_.observations) {
      const PoseEval a = eval_pose(x, o.pose);
      const auto& f = layout_.entry(feature_key(o.feature));
      const Eigen::VectorXd r = residual_obs(x, o);
      std::vector<std::pair<int, Eigen::MatrixXd>> jb;
      jb.emplace_back(f.offset, Eigen::MatrixXd(a.m));
      if (a.offset >= 0) {
        Eigen::MatrixXd j = Eigen::MatrixXd::Zero(td_, td_ + rd_);
        j.topLeftCorner(td_, td_) = -a.m;
        if (rd_ > 0) {
          const Eigen::VectorXd d = x.segment(f.offset, td_) - a.t;
          if (data_.dim == Dimension::D2) {
            j.block(0, td_, td_, 1) = drot2(a.ang[0]) * d;
          } else {
            for (int k = 0; k < 3; ++k) {
              j.block(0, td_ + k, td_, 1) = drot3(a.ang, k) * d;
            }
          }
        }
        jb.emplace_back(a.offset, j);
      }
      add_term(r, o.info, jb);
    }

    n.resize(x.size(), x.size());
    n.setFromTriplets(ts.begin(), ts.end());
  }

  void wrap_state(Eigen::VectorXd& x) const {
    if (rd_ == 0) {
      return;
    }
    for (const auto& e : layout_.entries()) {
      if (e.key.kind == EntityKind::Pose) {
        for (int k = 0; k < rd_; ++k) {
          x[e.offset + td_ + k] = wrap_angle(x[e.offset + td_ + k]);
        }
      }
    }
  }

  void set_x(Eigen::VectorXd x) { x_ = std::move(x); }

 private:
  const RawLocalData& data_;
  int gauge_;
  int td_;
  int rd_;
  StateVector layout_;
  Eigen::VectorXd x_;
  std::set<int> init_feat_;
};

}  // namespace

BuildResult build_local_map(const RawLocalData& data, const FrameDescriptor& frame,
                            const GaussNewtonConfig& cfg) {
  cfg.validate();
  check_raw(data);

  // Frame preconditions before the heavy lifting.
  int gauge = data.pose_ids.front();
  if (const auto* p = std::get_if<PoseFrame>(&frame)) {
    if (!std::binary_search(data.pose_ids.begin(), data.pose_ids.end(), p->pose_id)) {
      throw MissingEntityError("build_local_map: frame pose not in the data");
    }
    gauge = p->pose_id;
  } else {
    const std::vector<int> feats = data.feature_ids();
    for (StateKey k : frame_entity_keys(frame)) {
      if (!std::binary_search(feats.begin(), feats.end(), k.id)) {
        throw MissingEntityError("build_local_map: frame feature not observed in the data");
      }
    }
    if (data.translation_only) {
      throw InvalidInputError("build_local_map: feature frames need rotational state");
    }
  }

  ChunkProblem prob(data, gauge);
  prob.dead_reckon();

  Eigen::VectorXd x = prob.x();
  double obj = prob.objective(x);
  bool converged = false;
  int iters = 0;

  Eigen::SparseMatrix<double> n;
  Eigen::VectorXd g;
  while (iters < cfg.max_iters) {
    prob.assemble(x, n, g);
    Eigen::SimplicialLLT<Eigen::SparseMatrix<double>, Eigen::Lower, Eigen::AMDOrdering<int>> llt(n);
    if (llt.info() != Eigen::Success) {
      throw SingularSystemError("build_local_map: normal equations not positive definite");
    }
    const Eigen::VectorXd delta = llt.solve(-g);
    if (delta.lpNorm<Eigen::Infinity>() < cfg.step_tol) {
      converged = true;
      break;
    }

    double alpha = 1.0;
    bool accepted = false;
    Eigen::VectorXd xn;
    double objn = obj;
    for (int h = 0; h <= 10; ++h) {
      xn = x + alpha * delta;
      prob.wrap_state(xn);
      objn = prob.objective(xn);
      if (objn <= obj) {
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted) {
      break;  // stalled; report non-convergence unless the step test passes next round
    }
    ++iters;
    const double decrease = obj - objn;
    x = xn;
    obj = objn;
    if (decrease <= cfg.rel_tol * std::max(1.0, obj)) {
      converged = true;
      break;
    }
  }

  prob.assemble(x, n, g);

  BuildResult out;
  out.converged = converged;
  out.iterations = iters;
  out.objective = obj;
  out.map.dim = data.dim;
  out.map.translation_only = data.translation_only;
  out.map.frame = PoseFrame{gauge};
  StateVector est = prob.layout();
  est.values() = x;
  out.map.estimate = std::move(est);
  out.map.info = SparseSymMatrix::from_full(n);

  if (!is_pose_frame(frame)) {
    out.map = reframe_map(out.map, frame);
  }
  return out;
}

}  // namespace mapjoin
