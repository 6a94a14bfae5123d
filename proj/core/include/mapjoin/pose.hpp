#pragma once

#include <Eigen/Core>

#include "mapjoin/angle.hpp"
#include "mapjoin/errors.hpp"

namespace mapjoin {

/// A 2D pose: position plus wrapped heading block.
struct Pose2 {
  Eigen::Vector2d t = Eigen::Vector2d::Zero();
  double r = 0.0;

  Pose2() = default;
  Pose2(const Eigen::Vector2d& t_in, double r_in) : t(t_in), r(wrap_angle(r_in)) {
    if (!t.allFinite()) {
      throw InvalidInputError("Pose2: non-finite translation");
    }
  }

  Eigen::Vector3d as_vector() const { return Eigen::Vector3d(t.x(), t.y(), r); }
  static Pose2 from_vector(const Eigen::Vector3d& v) { return Pose2(v.head<2>(), v[2]); }
};

/// A 3D pose: position plus Z-Y-X Euler angle block (yaw, pitch, roll),
/// each wrapped to (-pi, pi].
struct Pose3 {
  Eigen::Vector3d t = Eigen::Vector3d::Zero();
  Eigen::Vector3d ypr = Eigen::Vector3d::Zero();

  Pose3() = default;
  Pose3(const Eigen::Vector3d& t_in, const Eigen::Vector3d& ypr_in) : t(t_in) {
    if (!t.allFinite()) {
      throw InvalidInputError("Pose3: non-finite translation");
    }
    for (int i = 0; i < 3; ++i) {
      ypr[i] = wrap_angle(ypr_in[i]);
    }
  }

  Eigen::Matrix<double, 6, 1> as_vector() const {
    Eigen::Matrix<double, 6, 1> v;
    v << t, ypr;
    return v;
  }
  static Pose3 from_vector(const Eigen::Matrix<double, 6, 1>& v) {
    return Pose3(v.head<3>(), v.tail<3>());
  }
};

}  // namespace mapjoin
