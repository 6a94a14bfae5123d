#pragma once

#include <vector>

#include "mapjoin/local_map.hpp"
#include "mapjoin/raw_data.hpp"

namespace mapjoin {

/// Result of a reference nonlinear solve. These solvers exist for
/// verification: they minimize the exact joint objective by Gauss-Newton and
/// are used as ground truth against the closed-form joining pipeline.
struct OracleReport {
  LocalMap solution;
  double final_objective = 0.0;  // chi-square at the solution
  int iterations = 0;
  bool converged = false;
};

/// Minimizes the sum over all maps of the integrated-observation residuals:
/// each map's estimate, re-expressed from the global frame into that map's
/// frame, minus the map's stored estimate, weighted by the map's information
/// matrix. Angle residuals are wrapped componentwise.
///
/// `init` provides the global frame and the starting state; it must cover
/// every entity of every map (minus the frame entities of the global frame).
OracleReport full_nonlinear_ls(const std::vector<LocalMap>& maps, const LocalMap& init,
                               const GaussNewtonConfig& cfg = {});

/// Two-map special case of the above.
OracleReport nonlinear_join(const LocalMap& m1, const LocalMap& m2, const StateVector& init,
                            const FrameDescriptor& target_frame,
                            const GaussNewtonConfig& cfg = {});

/// The objective of full_nonlinear_ls evaluated at a given global map, i.e.
/// the chi-square of that solution against the maps.
double integrated_objective(const LocalMap& global, const std::vector<LocalMap>& maps);

}  // namespace mapjoin
