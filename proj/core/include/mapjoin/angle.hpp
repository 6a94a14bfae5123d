#pragma once

#include <cmath>

namespace mapjoin {

inline constexpr double kPi = 3.141592653589793238462643383279502884;
inline constexpr double kTwoPi = 2.0 * kPi;

/// Wraps an angle to the half-open interval (-pi, pi]. The boundary maps to
/// +pi, so -pi wraps to +pi. Throws InvalidInputError on non-finite input.
double wrap_angle(double theta);

/// Wrapped difference a - b in (-pi, pi].
double angle_diff(double a, double b);

/// A plain wrapped angle in radians.
class Angle {
 public:
  Angle() = default;
  explicit Angle(double radians) : radians_(wrap_angle(radians)) {}

  double radians() const { return radians_; }

 private:
  double radians_ = 0.0;
};

}  // namespace mapjoin
