#pragma once

#include "mapjoin/frame.hpp"
#include "mapjoin/local_map.hpp"
#include "mapjoin/raw_data.hpp"

namespace mapjoin {

struct BuildResult {
  LocalMap map;
  bool converged = false;
  int iterations = 0;
  double objective = 0.0;
};

/// Builds an optimized local map from raw odometry/observation data in the
/// requested frame. Initialization is dead reckoning from the frame pose;
/// features start at their first observation. Gauss-Newton with step halving
/// on objective increase; the returned information matrix is J^T W J at the
/// solution.
///
/// Feature-defined target frames are produced by building in the pose frame
/// of the first pose and re-framing, which yields the same optimum.
///
/// Throws InvalidInputError for disconnected data and MissingEntityError when
/// the frame references entities absent from the data. Non-convergence is
/// reported through the flag, not an exception.
BuildResult build_local_map(const RawLocalData& data, const FrameDescriptor& frame,
                            const GaussNewtonConfig& cfg = {});

}  // namespace mapjoin
