#pragma once

#include <string>
#include <variant>
#include <vector>

#include "mapjoin/state.hpp"

namespace mapjoin {

/// The map frame is the body frame of one pose. That pose is not part of the
/// map state.
struct PoseFrame {
  int pose_id = 0;
  friend bool operator==(const PoseFrame&, const PoseFrame&) = default;
};

/// 2D frame defined by two features: the origin feature sits at (0,0) and the
/// x axis points toward the axis feature. The origin feature is not in the
/// state; the axis feature keeps only its x coordinate.
struct FeatureFrame2 {
  int origin_id = 0;
  int x_axis_id = 0;
  friend bool operator==(const FeatureFrame2&, const FeatureFrame2&) = default;
};

/// 3D frame defined by three non-collinear features: origin at (0,0,0), x axis
/// toward the axis feature, x-y plane through the plane feature. The axis
/// feature keeps only x; the plane feature keeps (x, y).
struct FeatureFrame3 {
  int origin_id = 0;
  int x_axis_id = 0;
  int plane_id = 0;
  friend bool operator==(const FeatureFrame3&, const FeatureFrame3&) = default;
};

using FrameDescriptor = std::variant<PoseFrame, FeatureFrame2, FeatureFrame3>;

inline bool is_pose_frame(const FrameDescriptor& f) {
  return std::holds_alternative<PoseFrame>(f);
}

inline bool is_feature_frame(const FrameDescriptor& f) { return !is_pose_frame(f); }

/// Keys of the entities that define the frame.
std::vector<StateKey> frame_entity_keys(const FrameDescriptor& f);

std::string frame_to_string(const FrameDescriptor& f);

}  // namespace mapjoin
