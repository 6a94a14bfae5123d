#pragma once

#include <Eigen/Core>
#include <vector>

#include "mapjoin/state.hpp"

namespace mapjoin {

/// A relative-pose measurement between two poses of one chunk. The
/// measurement stacks the translation of `to` expressed in `from`'s body
/// frame and (unless the chunk is translation-only) the relative rotation
/// block; the information matrix matches that layout.
struct OdometryEdge {
  int from = 0;
  int to = 0;
  Eigen::VectorXd meas;
  Eigen::MatrixXd info;
};

/// A Cartesian feature observation: the feature position expressed in the
/// observing pose's body frame.
struct ObservationEdge {
  int pose = 0;
  int feature = 0;
  Eigen::VectorXd meas;
  Eigen::MatrixXd info;
};

/// The odometry and observation data for building one local map.
struct RawLocalData {
  Dimension dim = Dimension::D2;
  bool translation_only = false;
  std::vector<int> pose_ids;  // ascending
  std::vector<OdometryEdge> odometry;
  std::vector<ObservationEdge> observations;

  std::vector<int> feature_ids() const;
};

/// Gauss-Newton iteration controls.
struct GaussNewtonConfig {
  int max_iters = 50;
  double rel_tol = 1e-12;   // relative objective decrease
  double step_tol = 1e-12;  // infinity norm of the update

  void validate() const;
};

}  // namespace mapjoin
