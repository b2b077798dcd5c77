#include "cell/pose.hpp"

#include <algorithm>
#include <cmath>

namespace cell {

bool RobotPose::finite() const {
  return position_mm.allFinite() && orientation.coeffs().allFinite();
}

bool RobotPose::operator==(const RobotPose& other) const {
  return position_mm == other.position_mm && orientation.coeffs() == other.orientation.coeffs();
}

bool ArPose::finite() const {
  return position_m.allFinite() && orientation.coeffs().allFinite();
}

double angular_distance(const Eigen::Quaterniond& a, const Eigen::Quaterniond& b) {
  // |<a,b>| = cos(theta/2); atan2 form stays accurate for tiny angles.
  const Eigen::Quaterniond rel = a.conjugate() * b;
  const double s = rel.vec().norm();
  const double c = std::abs(rel.w());
  return 2.0 * std::atan2(s, c);
}

}  // namespace cell
