#pragma once

#include <Eigen/Core>

namespace mapjoin {

// Rotation conventions used throughout:
//  - rot2(theta) is the standard counter-clockwise rotation matrix.
//  - 3D rotations are Z-Y-X Euler angles (yaw, pitch, roll):
//    R = Rz(yaw) * Ry(pitch) * Rx(roll).
//  - The rotation block r stored for a pose is defined so that a point p
//    expressed in the map frame is seen by that pose as rot(r) * (p - t).
//    Relative rotation blocks compose the same way.

Eigen::Matrix2d rot2(double theta);

/// d rot2 / d theta.
Eigen::Matrix2d drot2(double theta);

Eigen::Matrix3d rot3(const Eigen::Vector3d& ypr);

/// d rot3 / d ypr[k] for k in {0,1,2}.
Eigen::Matrix3d drot3(const Eigen::Vector3d& ypr, int k);

/// Extracts (yaw, pitch, roll) from a proper rotation matrix. Throws
/// DegenerateRotationError when |R(2,0)| >= 1 - 1e-9 (pitch at +-pi/2).
Eigen::Vector3d angles_from_rot3(const Eigen::Matrix3d& r);

/// Derivative of angles_from_rot3 with respect to the nine entries of R in
/// column-major order.
Eigen::Matrix<double, 3, 9> dangles_drot3(const Eigen::Matrix3d& r);

/// Flattens a 3x3 matrix column-major, matching dangles_drot3 columns.
Eigen::Matrix<double, 9, 1> vec3x3(const Eigen::Matrix3d& m);

/// Angle block (size 1 or 3) to rotation matrix (2x2 or 3x3).
Eigen::MatrixXd rot_from_angles(const Eigen::VectorXd& angles);

/// Rotation matrix (2x2 or 3x3) to wrapped angle block (size 1 or 3).
Eigen::VectorXd angles_from_rot(const Eigen::MatrixXd& r);

}  // namespace mapjoin
