#pragma once

#include <Eigen/SparseCore>

#include "mapjoin/local_map.hpp"

namespace mapjoin {

/// Result of re-expressing a map state in another frame.
struct FrameChange {
  StateVector state;
  /// d(output state) / d(input state), filled when requested. Rows follow the
  /// output layout, columns the input layout.
  Eigen::SparseMatrix<double> jacobian;
};

/// Re-expresses every entity of the map in the frame named by target and
/// returns the new state (ascending key order). The entities that defined the
/// old frame enter the state; the entities defining the new frame leave it
/// (feature-defined frames keep the usual reduced axis entries). Closed form
/// in both directions; no iteration involved.
///
/// Throws MissingEntityError when a target entity cannot be recovered from
/// the map, DegenerateFrameError for coincident/collinear defining features,
/// and DegenerateRotationError near the Euler pitch singularity (3D).
FrameChange change_frame(const LocalMap& m, const FrameDescriptor& target, bool with_jacobian);

/// Full re-framing: transforms the estimate in closed form and propagates the
/// information matrix through the analytic Jacobian of the reverse transform.
/// Re-framing back reproduces the original map up to rounding.
LocalMap reframe_map(const LocalMap& m, const FrameDescriptor& target);

namespace detail {

/// One pose or feature of a map, materialized to full coordinates in the
/// map's current frame. Coordinates fixed by the frame have source index -1;
/// the rest carry their scalar index into the state vector.
struct Entity {
  StateKey key;
  Eigen::VectorXd pos;
  Eigen::VectorXd ang;  // empty for features and translation-only poses
  std::vector<int> pos_src;
  std::vector<int> ang_src;

  bool is_pose() const { return key.kind == EntityKind::Pose; }
};

/// State entries plus the implicit frame-defining entities, ascending by key.
std::vector<Entity> materialize(const LocalMap& m);

const Entity* find_entity(const std::vector<Entity>& es, StateKey key);

}  // namespace detail

}  // namespace mapjoin
