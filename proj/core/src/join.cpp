#include "mapjoin/join.hpp"

#include <Eigen/Geometry>

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>
#include <algorithm>
#include <climits>
#include <cmath>
#include <set>

#include "mapjoin/angle.hpp"
#include "mapjoin/errors.hpp"
#include "mapjoin/transform.hpp"

namespace mapjoin {

namespace {

constexpr double kCoincidence = 1e-9;
constexpr double kCollinearRatio = 1e-8;

std::vector<StateKey> physical_keys(const LocalMap& m) {
  std::vector<StateKey> keys = m.estimate.keys();
  for (StateKey k : frame_entity_keys(m.frame)) {
    if (!m.estimate.contains(k)) {
      keys.push_back(k);
    }
  }
  std::sort(keys.begin(), keys.end());
  return keys;
}

std::vector<StateKey> intersect_sorted(const std::vector<StateKey>& a,
                                       const std::vector<StateKey>& b) {
  std::vector<StateKey> out;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

Eigen::VectorXd entity_position(const std::vector<detail::Entity>& ents, StateKey key) {
  const detail::Entity* e = detail::find_entity(ents, key);
  if (e == nullptr) {
    throw MissingEntityError("join: feature position unavailable");
  }
  return e->pos;
}

}  // namespace

JoinKind classify_join(const LocalMap& m1, const LocalMap& m2) {
  if (m1.dim != m2.dim) {
    throw InvalidInputError("classify_join: maps have different dimensionality");
  }
  if (m1.translation_only != m2.translation_only) {
    throw InvalidInputError("classify_join: translation-only flag differs");
  }

  const std::vector<StateKey> phys1 = physical_keys(m1);
  const std::vector<StateKey> phys2 = physical_keys(m2);
  const std::vector<StateKey> phys_common = intersect_sorted(phys1, phys2);

  int common_poses = 0;
  std::vector<StateKey> common_feats;
  for (StateKey k : phys_common) {
    if (k.kind == EntityKind::Pose) {
      ++common_poses;
    } else {
      common_feats.push_back(k);
    }
  }

  const bool pose_world = is_pose_frame(m1.frame) || is_pose_frame(m2.frame);
  JoinVariant variant;
  if (pose_world) {
    if (common_poses == 0) {
      throw NotJoinableError("classify_join: no common pose between the maps");
    }
    const bool any_features = std::any_of(phys1.begin(), phys1.end(),
                                          [](StateKey k) { return k.kind == EntityKind::Feature; }) ||
                              std::any_of(phys2.begin(), phys2.end(),
                                          [](StateKey k) { return k.kind == EntityKind::Feature; });
    variant = any_features ? JoinVariant::PoseFeature : JoinVariant::PoseOnly;
  } else {
    variant = JoinVariant::FeatureOnly;
    const int need = m1.dim == Dimension::D2 ? 2 : 3;
    if (static_cast<int>(common_feats.size()) < need) {
      throw NotJoinableError("classify_join: fewer than " + std::to_string(need) +
                             " common features");
    }
    if (m1.dim == Dimension::D3) {
      // Collinear common features cannot pin a 3D frame.
      const auto ents = detail::materialize(m1);
      Eigen::MatrixXd pts(3, common_feats.size());
      for (std::size_t i = 0; i < common_feats.size(); ++i) {
        pts.col(i) = entity_position(ents, common_feats[i]);
      }
      pts.colwise() -= Eigen::Vector3d(pts.rowwise().mean());
      const Eigen::JacobiSVD<Eigen::MatrixXd> svd(pts);
      const auto& sv = svd.singularValues();
      // Rank must be at least 2: the two largest singular values nonzero.
      if (sv.size() < 2 || sv[1] < kCollinearRatio * sv[0]) {
        throw DegenerateCommonSetError("classify_join: common features are collinear");
      }
    }
  }

  if (!(m1.frame == m2.frame)) {
    throw FrameMismatchError("classify_join: maps are in different frames (" +
                             frame_to_string(m1.frame) + " vs " + frame_to_string(m2.frame) + ")");
  }

  JoinKind kind;
  kind.variant = variant;
  kind.common = intersect_sorted(m1.estimate.keys(), m2.estimate.keys());
  std::sort(kind.common.begin(), kind.common.end());
  return kind;
}

LocalMap wrap_common_angles(const LocalMap& m1, const LocalMap& m2,
                            const std::vector<StateKey>& common) {
  LocalMap out = m2;
  if (m2.translation_only) {
    return out;
  }
  const int td = trans_dim(m2.dim);
  const int rd = rot_dim(m2.dim);
  for (StateKey k : common) {
    if (k.kind != EntityKind::Pose) {
      continue;
    }
    const Eigen::VectorXd a1 = m1.estimate.block_of(k);
    Eigen::VectorXd a2 = out.estimate.block_of(k);
    for (int i = 0; i < rd; ++i) {
      // Shift by whole turns so the difference against m1 is wrapped.
      a2[td + i] = a1[td + i] - wrap_angle(a1[td + i] - a2[td + i]);
    }
    out.estimate.set_block(k, a2);
  }
  return out;
}

LinearJoinSystem assemble_system(const LocalMap& m1, const LocalMap& m2, const JoinKind& kind) {
  LinearJoinSystem sys;
  sys.dim = m1.dim;
  sys.translation_only = m1.translation_only;
  sys.frame = m1.frame;

  const std::set<StateKey> common(kind.common.begin(), kind.common.end());
  for (const auto& e : m1.estimate.entries()) {
    if (!common.count(e.key)) {
      sys.layout.add(e.key, Eigen::VectorXd::Zero(e.dim));
    }
  }
  for (const auto& e : m2.estimate.entries()) {
    if (!common.count(e.key)) {
      sys.layout.add(e.key, Eigen::VectorXd::Zero(e.dim));
    }
  }
  for (StateKey k : kind.common) {
    const int d1 = m1.estimate.dim_of(k);
    if (d1 != m2.estimate.dim_of(k)) {
      throw InvalidInputError("assemble_system: common entry dimensions differ");
    }
    sys.layout.add(k, Eigen::VectorXd::Zero(d1));
  }

  const int d1 = m1.estimate.dim();
  const int d2 = m2.estimate.dim();
  sys.z.resize(d1 + d2);
  sys.z.head(d1) = m1.estimate.values();
  sys.z.tail(d2) = m2.estimate.values();

  std::vector<Eigen::Triplet<double>> ats;
  auto add_rows = [&](const StateVector& sv, int row_base) {
    for (const auto& e : sv.entries()) {
      const int col = sys.layout.offset_of(e.key);
      for (int i = 0; i < e.dim; ++i) {
        ats.emplace_back(row_base + e.offset + i, col + i, 1.0);
      }
    }
  };
  add_rows(m1.estimate, 0);
  add_rows(m2.estimate, d1);
  sys.a.resize(d1 + d2, sys.layout.dim());
  sys.a.setFromTriplets(ats.begin(), ats.end());

  std::vector<Eigen::Triplet<double>> its;
  for (const auto& t : m1.info.lower_triplets()) {
    its.emplace_back(t.row(), t.col(), t.value());
  }
  for (const auto& t : m2.info.lower_triplets()) {
    its.emplace_back(d1 + t.row(), d1 + t.col(), t.value());
  }
  sys.info_z = SparseSymMatrix::from_triplets(d1 + d2, its);
  return sys;
}

JoinSolution solve_join(const LinearJoinSystem& sys) {
  const Eigen::SparseMatrix<double> iz = sys.info_z.full();
  const Eigen::SparseMatrix<double> n = sys.a.transpose() * iz * sys.a;
  const Eigen::VectorXd b = sys.a.transpose() * (iz * sys.z);

  Eigen::SimplicialLLT<Eigen::SparseMatrix<double>, Eigen::Lower, Eigen::AMDOrdering<int>> llt(n);
  if (llt.info() != Eigen::Success) {
    throw SingularSystemError("solve_join: normal matrix is not positive definite");
  }
  Eigen::VectorXd x = llt.solve(b);

  const int td = trans_dim(sys.dim);
  const int rd = sys.translation_only ? 0 : rot_dim(sys.dim);
  for (const auto& e : sys.layout.entries()) {
    if (e.key.kind == EntityKind::Pose) {
      for (int k = 0; k < rd; ++k) {
        x[e.offset + td + k] = wrap_angle(x[e.offset + td + k]);
      }
    }
  }

  JoinSolution sol;
  sol.estimate = sys.layout;
  sol.estimate.values() = std::move(x);
  sol.info = SparseSymMatrix::from_full(n);
  return sol;
}

LocalMap transform_pose_frame(const LocalMap& joint, int new_frame_pose_id) {
  return reframe_map(joint, PoseFrame{new_frame_pose_id});
}

LocalMap transform_feature_frame(const LocalMap& joint, const FrameDescriptor& feature_frame) {
  if (is_pose_frame(feature_frame)) {
    throw InvalidInputError("transform_feature_frame: target must be feature-defined");
  }
  return reframe_map(joint, feature_frame);
}

std::optional<FrameDescriptor> default_join_target(const LocalMap& m1, const LocalMap& m2,
                                                   const JoinKind& kind) {
  if (kind.variant != JoinVariant::FeatureOnly) {
    int end_pose = INT_MIN;
    for (const auto& e : m2.estimate.entries()) {
      if (e.key.kind == EntityKind::Pose) {
        end_pose = std::max(end_pose, e.key.id);
      }
    }
    if (end_pose == INT_MIN) {
      return std::nullopt;  // m2's only pose is the shared frame; stay there
    }
    return FrameDescriptor(PoseFrame{end_pose});
  }

  // Feature-only: smallest-id non-degenerate tuple of common features,
  // counting the frame-defining features.
  std::set<StateKey> cand_set(kind.common.begin(), kind.common.end());
  for (StateKey k : frame_entity_keys(m1.frame)) {
    cand_set.insert(k);
  }
  std::vector<int> ids;
  for (StateKey k : cand_set) {
    if (k.kind == EntityKind::Feature) {
      ids.push_back(k.id);
    }
  }
  std::sort(ids.begin(), ids.end());

  const auto ents = detail::materialize(m1);
  auto pos = [&](int id) { return entity_position(ents, feature_key(id)); };

  if (m1.dim == Dimension::D2) {
    for (std::size_t i = 0; i + 1 < ids.size(); ++i) {
      for (std::size_t j = i + 1; j < ids.size(); ++j) {
        if ((pos(ids[j]) - pos(ids[i])).norm() > kCoincidence) {
          return FrameDescriptor(FeatureFrame2{ids[i], ids[j]});
        }
      }
    }
  } else {
    for (std::size_t i = 0; i + 2 < ids.size(); ++i) {
      for (std::size_t j = i + 1; j + 1 < ids.size(); ++j) {
        for (std::size_t k = j + 1; k < ids.size(); ++k) {
          const Eigen::Vector3d v1 = pos(ids[j]) - pos(ids[i]);
          const Eigen::Vector3d u = pos(ids[k]) - pos(ids[i]);
          if (v1.norm() > kCoincidence && u.norm() > kCoincidence &&
              v1.cross(u).norm() > kCollinearRatio * v1.norm() * u.norm()) {
            return FrameDescriptor(FeatureFrame3{ids[i], ids[j], ids[k]});
          }
        }
      }
    }
  }
  throw DegenerateCommonSetError("join: no non-degenerate frame tuple among common features");
}

namespace {

LocalMap join_impl(const LocalMap& m1, const LocalMap& m2,
                   const std::optional<FrameDescriptor>& target_opt) {
  const JoinKind kind = classify_join(m1, m2);
  const LocalMap m2w = wrap_common_angles(m1, m2, kind.common);
  const LinearJoinSystem sys = assemble_system(m1, m2w, kind);
  JoinSolution sol = solve_join(sys);

  LocalMap joint;
  joint.dim = m1.dim;
  joint.translation_only = m1.translation_only;
  joint.frame = m1.frame;
  joint.estimate = std::move(sol.estimate);
  joint.info = std::move(sol.info);
  joint = canonicalize(joint);

  std::optional<FrameDescriptor> target = target_opt;
  if (!target) {
    target = default_join_target(m1, m2, kind);
  }
  if (!target || *target == joint.frame) {
    return joint;
  }
  return reframe_map(joint, *target);
}

}  // namespace

LocalMap join_two_maps(const LocalMap& m1, const LocalMap& m2) {
  return join_impl(m1, m2, std::nullopt);
}

LocalMap join_two_maps_to(const LocalMap& m1, const LocalMap& m2, const FrameDescriptor& target) {
  return join_impl(m1, m2, target);
}

}  // namespace mapjoin
