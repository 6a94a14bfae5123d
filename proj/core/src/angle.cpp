#include "mapjoin/angle.hpp"

#include "mapjoin/errors.hpp"

namespace mapjoin {

double wrap_angle(double theta) {
  if (!std::isfinite(theta)) {
    throw InvalidInputError("wrap_angle: non-finite angle");
  }
  double r = std::remainder(theta, kTwoPi);
  if (r <= -kPi) {
    r += kTwoPi;
  }
  return r;
}

double angle_diff(double a, double b) { return wrap_angle(a - b); }

}  // namespace mapjoin
