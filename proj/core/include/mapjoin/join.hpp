#pragma once

#include <Eigen/SparseCore>
#include <optional>
#include <vector>

#include "mapjoin/local_map.hpp"

namespace mapjoin {

enum class JoinVariant { PoseFeature, PoseOnly, FeatureOnly };

/// How two maps can be joined and which state entries they share. Entities
/// that define the (identical) frames are common implicitly and not listed.
struct JoinKind {
  JoinVariant variant = JoinVariant::PoseFeature;
  std::vector<StateKey> common;  // ascending
};

/// Decides the join variant and the shared entries.
///
/// Throws InvalidInputError on dimension/parameterization mismatch,
/// NotJoinableError when the maps lack the minimum common elements (one pose,
/// or two/three features), DegenerateCommonSetError when the 3D common
/// features are collinear, and FrameMismatchError when the maps share enough
/// but sit in different frames (re-frame them first).
JoinKind classify_join(const LocalMap& m1, const LocalMap& m2);

/// Returns a copy of m2 whose common pose angles are shifted by multiples of
/// 2 pi so every angle difference against m1 falls in (-pi, pi]. Nothing else
/// changes; the shifted angles may leave the wrapped interval.
LocalMap wrap_common_angles(const LocalMap& m1, const LocalMap& m2,
                            const std::vector<StateKey>& common);

/// The stacked linear system of a two-map join: minimize the weighted norm
/// of a x - z under the block-diagonal information of the two maps. The
/// coefficient matrix is all identity blocks, one row block per map entry;
/// common entries receive rows from both maps.
struct LinearJoinSystem {
  Dimension dim = Dimension::D2;
  bool translation_only = false;
  FrameDescriptor frame = PoseFrame{0};  // the shared frame of both maps
  Eigen::SparseMatrix<double> a;
  Eigen::VectorXd z;
  SparseSymMatrix info_z;
  /// Joint layout: [entries only in m1, entries only in m2, common entries],
  /// each group ascending. Values are zero placeholders.
  StateVector layout;
};

LinearJoinSystem assemble_system(const LocalMap& m1, const LocalMap& m2, const JoinKind& kind);

struct JoinSolution {
  StateVector estimate;  // solved joint state, angles wrapped
  SparseSymMatrix info;  // a^T I_z a
};

/// Solves the normal equations of the system with a sparse Cholesky under an
/// approximate-minimum-degree ordering. Throws SingularSystemError when the
/// normal matrix is not positive definite.
JoinSolution solve_join(const LinearJoinSystem& sys);

/// Re-expresses a solved joint map (in the shared frame) in the frame of one
/// of its poses, with exact information propagation. The named pose leaves
/// the state and the old frame pose enters it.
LocalMap transform_pose_frame(const LocalMap& joint, int new_frame_pose_id);

/// Same, into a feature-defined frame.
LocalMap transform_feature_frame(const LocalMap& joint, const FrameDescriptor& feature_frame);

/// The full pipeline: classify, wrap, assemble, solve, transform. The result
/// frame is the end pose of m2 for pose-feature/pose-only joins and the
/// smallest-id non-degenerate common feature tuple for feature-only joins.
LocalMap join_two_maps(const LocalMap& m1, const LocalMap& m2);

/// As join_two_maps with an explicit output frame.
LocalMap join_two_maps_to(const LocalMap& m1, const LocalMap& m2, const FrameDescriptor& target);

/// Picks the frame the joined map should land in when none is requested:
/// the largest pose id of m2 (pose variants) or the smallest-id
/// non-degenerate common feature tuple (feature-only). Returns nothing when
/// the joint map should stay in the shared frame.
std::optional<FrameDescriptor> default_join_target(const LocalMap& m1, const LocalMap& m2,
                                                   const JoinKind& kind);

}  // namespace mapjoin
