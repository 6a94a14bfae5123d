#pragma once

#include <vector>

#include "mapjoin/join.hpp"
#include "mapjoin/local_map.hpp"

namespace mapjoin {

/// Wall-time of the joining phase (map building excluded) plus the number of
/// pairwise joins executed.
struct JoinTimings {
  double join_seconds = 0.0;
  int joins = 0;
};

/// Left fold of pairwise joins. Inputs are re-framed on the fly so every
/// consecutive pair shares a frame; the final map sits in the frame of the
/// end pose of the last map (pose variants). Exactly n-1 joins.
/// A pair without enough common elements aborts with the step index in the
/// NotJoinableError message.
LocalMap join_sequential(const std::vector<LocalMap>& maps, JoinTimings* timings = nullptr);

/// Hierarchical pairwise joining: adjacent results are paired level by level
/// and an odd leftover is promoted unchanged. Same-level joins may run on a
/// worker pool; the pairing is fixed, so the result is identical at any
/// thread count. Exactly n-1 joins.
LocalMap join_divide_conquer(const std::vector<LocalMap>& maps, int threads = 1,
                             JoinTimings* timings = nullptr);

/// Re-frames a and b onto a deterministic shared frame so they can be joined:
/// the largest common pose, or the smallest-id non-degenerate common feature
/// tuple for feature-only maps. Throws NotJoinableError when none exists.
std::pair<LocalMap, LocalMap> prepare_pair(const LocalMap& a, const LocalMap& b);

}  // namespace mapjoin
