#pragma once

#include "mapjoin/frame.hpp"
#include "mapjoin/sparse.hpp"
#include "mapjoin/state.hpp"

namespace mapjoin {

/// A map summarized as a state estimate and its information matrix, together
/// with the descriptor of the coordinate frame the estimate lives in. This is
/// the unit every joining and evaluation routine operates on.
///
/// Invariants (see validate()):
///  - info.dim() == estimate.dim() and info is positive semidefinite,
///  - frame-defining entities are absent from the state except for the
///    reduced axis-feature entries of feature-defined frames,
///  - pose angle components are wrapped, entries are in ascending key order.
struct LocalMap {
  Dimension dim = Dimension::D2;
  /// Translation-only maps have no rotational state: pose blocks are bare
  /// positions and every frame change is affine.
  bool translation_only = false;
  FrameDescriptor frame = PoseFrame{0};
  StateVector estimate;
  SparseSymMatrix info;

  int state_dim() const { return estimate.dim(); }

  /// Checks all structural invariants; throws InvalidInputError on breach.
  /// PSD verification is Cholesky success with ridge 1e-12 * trace / dim.
  void validate() const;
};

/// Sorts the state ascending by key and permutes the information matrix to
/// match. All library routines produce and expect canonical maps.
LocalMap canonicalize(const LocalMap& m);

/// Expected block length for a key in a map with the given properties; the
/// reduced frame-feature entries are handled by the caller.
int expected_block_dim(StateKey key, Dimension dim, bool translation_only);

}  // namespace mapjoin
