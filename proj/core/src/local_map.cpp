#include "mapjoin/local_map.hpp"

#include <cmath>

#include "mapjoin/angle.hpp"
#include "mapjoin/errors.hpp"

namespace mapjoin {

std::vector<StateKey> frame_entity_keys(const FrameDescriptor& f) {
  std::vector<StateKey> keys;
  if (const auto* p = std::get_if<PoseFrame>(&f)) {
    keys.push_back(pose_key(p->pose_id));
  } else if (const auto* f2 = std::get_if<FeatureFrame2>(&f)) {
    keys.push_back(feature_key(f2->origin_id));
    keys.push_back(feature_key(f2->x_axis_id));
  } else if (const auto* f3 = std::get_if<FeatureFrame3>(&f)) {
    keys.push_back(feature_key(f3->origin_id));
    keys.push_back(feature_key(f3->x_axis_id));
    keys.push_back(feature_key(f3->plane_id));
  }
  return keys;
}

std::string frame_to_string(const FrameDescriptor& f) {
  if (const auto* p = std::get_if<PoseFrame>(&f)) {
    return "pose " + std::to_string(p->pose_id);
  }
  if (const auto* f2 = std::get_if<FeatureFrame2>(&f)) {
    return "features " + std::to_string(f2->origin_id) + "," + std::to_string(f2->x_axis_id);
  }
  const auto& f3 = std::get<FeatureFrame3>(f);
  return "features " + std::to_string(f3.origin_id) + "," + std::to_string(f3.x_axis_id) + "," +
         std::to_string(f3.plane_id);
}

int expected_block_dim(StateKey key, Dimension dim, bool translation_only) {
  return key.kind == EntityKind::Pose ? pose_dim(dim, translation_only) : trans_dim(dim);
}

void LocalMap::validate() const {
  if (info.dim() != estimate.dim()) {
    throw InvalidInputError("LocalMap: information matrix dimension " +
                            std::to_string(info.dim()) + " != state dimension " +
                            std::to_string(estimate.dim()));
  }
  if (!estimate.is_sorted()) {
    throw InvalidInputError("LocalMap: state entries not in ascending key order");
  }

  // Frame entities must be absent, except the reduced axis entries.
  int x_axis_feat = -1;
  int plane_feat = -1;
  if (const auto* p = std::get_if<PoseFrame>(&frame)) {
    if (estimate.contains(pose_key(p->pose_id))) {
      throw InvalidInputError("LocalMap: frame pose present in the state");
    }
  } else if (const auto* f2 = std::get_if<FeatureFrame2>(&frame)) {
    if (dim != Dimension::D2) {
      throw InvalidInputError("LocalMap: 2-feature frame on a 3D map");
    }
    if (estimate.contains(feature_key(f2->origin_id))) {
      throw InvalidInputError("LocalMap: frame origin feature present in the state");
    }
    x_axis_feat = f2->x_axis_id;
  } else if (const auto* f3 = std::get_if<FeatureFrame3>(&frame)) {
    if (dim != Dimension::D3) {
      throw InvalidInputError("LocalMap: 3-feature frame on a 2D map");
    }
    if (estimate.contains(feature_key(f3->origin_id))) {
      throw InvalidInputError("LocalMap: frame origin feature present in the state");
    }
    x_axis_feat = f3->x_axis_id;
    plane_feat = f3->plane_id;
  }

  const int td = trans_dim(dim);
  const int rd = translation_only ? 0 : rot_dim(dim);
  for (const auto& e : estimate.entries()) {
    int want;
    if (e.key.kind == EntityKind::Feature && e.key.id == x_axis_feat) {
      want = 1;
    } else if (e.key.kind == EntityKind::Feature && e.key.id == plane_feat) {
      want = 2;
    } else if (e.key.kind == EntityKind::Pose) {
      want = td + rd;
    } else {
      want = td;
    }
    if (e.dim != want) {
      throw InvalidInputError("LocalMap: block for " +
                              std::string(e.key.kind == EntityKind::Pose ? "pose " : "feature ") +
                              std::to_string(e.key.id) + " has dimension " + std::to_string(e.dim) +
                              ", expected " + std::to_string(want));
    }
    if (e.key.kind == EntityKind::Pose && rd > 0) {
      for (int k = 0; k < rd; ++k) {
        const double a = estimate.values()[e.offset + td + k];
        if (!(a > -kPi - 1e-12 && a <= kPi + 1e-12)) {
          throw InvalidInputError("LocalMap: unwrapped angle on pose " + std::to_string(e.key.id));
        }
      }
    }
  }

  for (int i = 0; i < estimate.dim(); ++i) {
    if (!std::isfinite(estimate.values()[i])) {
      throw InvalidInputError("LocalMap: non-finite state value");
    }
  }

  if (!info.is_psd()) {
    throw InvalidInputError("LocalMap: information matrix is not positive semidefinite");
  }
}

LocalMap canonicalize(const LocalMap& m) {
  if (m.estimate.is_sorted()) {
    return m;
  }
  auto [sorted_state, perm] = m.estimate.sorted();
  LocalMap out = m;
  out.estimate = std::move(sorted_state);
  out.info = m.info.permuted(perm);
  return out;
}

}  // namespace mapjoin
