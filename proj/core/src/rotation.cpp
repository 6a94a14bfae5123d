#include "mapjoin/rotation.hpp"

#include <cmath>

#include "mapjoin/angle.hpp"
#include "mapjoin/errors.hpp"

namespace mapjoin {

namespace {
constexpr double kGimbalGuard = 1.0 - 1e-9;
}

Eigen::Matrix2d rot2(double theta) {
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  Eigen::Matrix2d r;
  r << c, -s, s, c;
  return r;
}

Eigen::Matrix2d drot2(double theta) {
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  Eigen::Matrix2d r;
  r << -s, -c, c, -s;
  return r;
}

namespace {

Eigen::Matrix3d rz(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Eigen::Matrix3d m;
  m << c, -s, 0, s, c, 0, 0, 0, 1;
  return m;
}

Eigen::Matrix3d ry(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Eigen::Matrix3d m;
  m << c, 0, s, 0, 1, 0, -s, 0, c;
  return m;
}

Eigen::Matrix3d rx(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Eigen::Matrix3d m;
  m << 1, 0, 0, 0, c, -s, 0, s, c;
  return m;
}

Eigen::Matrix3d drz(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Eigen::Matrix3d m;
  m << -s, -c, 0, c, -s, 0, 0, 0, 0;
  return m;
}

Eigen::Matrix3d dry(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Eigen::Matrix3d m;
  m << -s, 0, c, 0, 0, 0, -c, 0, -s;
  return m;
}

Eigen::Matrix3d drx(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Eigen::Matrix3d m;
  m << 0, 0, 0, 0, -s, -c, 0, c, -s;
  return m;
}

}  // namespace

Eigen::Matrix3d rot3(const Eigen::Vector3d& ypr) {
  return rz(ypr[0]) * ry(ypr[1]) * rx(ypr[2]);
}

Eigen::Matrix3d drot3(const Eigen::Vector3d& ypr, int k) {
  switch (k) {
    case 0:
      return drz(ypr[0]) * ry(ypr[1]) * rx(ypr[2]);
    case 1:
      return rz(ypr[0]) * dry(ypr[1]) * rx(ypr[2]);
    case 2:
      return rz(ypr[0]) * ry(ypr[1]) * drx(ypr[2]);
    default:
      throw InvalidInputError("drot3: angle index out of range");
  }
}

Eigen::Vector3d angles_from_rot3(const Eigen::Matrix3d& r) {
  if (std::abs(r(2, 0)) >= kGimbalGuard) {
    throw DegenerateRotationError("angles_from_rot3: pitch within guard band of +-pi/2");
  }
  Eigen::Vector3d ypr;
  ypr[0] = std::atan2(r(1, 0), r(0, 0));
  ypr[1] = -std::asin(r(2, 0));
  ypr[2] = std::atan2(r(2, 1), r(2, 2));
  return ypr;
}

Eigen::Matrix<double, 3, 9> dangles_drot3(const Eigen::Matrix3d& r) {
  Eigen::Matrix<double, 3, 9> d = Eigen::Matrix<double, 3, 9>::Zero();
  auto col = [](int i, int j) { return 3 * j + i; };
  const double q0 = r(0, 0) * r(0, 0) + r(1, 0) * r(1, 0);
  d(0, col(1, 0)) = r(0, 0) / q0;
  d(0, col(0, 0)) = -r(1, 0) / q0;
  d(1, col(2, 0)) = -1.0 / std::sqrt(1.0 - r(2, 0) * r(2, 0));
  const double q2 = r(2, 1) * r(2, 1) + r(2, 2) * r(2, 2);
  d(2, col(2, 1)) = r(2, 2) / q2;
  d(2, col(2, 2)) = -r(2, 1) / q2;
  return d;
}

Eigen::Matrix<double, 9, 1> vec3x3(const Eigen::Matrix3d& m) {
  return Eigen::Map<const Eigen::Matrix<double, 9, 1>>(m.data());
}

Eigen::MatrixXd rot_from_angles(const Eigen::VectorXd& angles) {
  if (angles.size() == 1) {
    return rot2(angles[0]);
  }
  if (angles.size() == 3) {
    return rot3(angles);
  }
  throw InvalidInputError("rot_from_angles: angle block must have size 1 or 3");
}

Eigen::VectorXd angles_from_rot(const Eigen::MatrixXd& r) {
  if (r.rows() == 2 && r.cols() == 2) {
    Eigen::VectorXd a(1);
    a[0] = wrap_angle(std::atan2(r(1, 0), r(0, 0)));
    return a;
  }
  if (r.rows() == 3 && r.cols() == 3) {
    Eigen::Vector3d ypr = angles_from_rot3(r);
    Eigen::VectorXd a(3);
    a << wrap_angle(ypr[0]), wrap_angle(ypr[1]), wrap_angle(ypr[2]);
    return a;
  }
  throw InvalidInputError("angles_from_rot: matrix must be 2x2 or 3x3");
}

}  // namespace mapjoin
