#include "cell/frames.hpp"

#include "cell/error.hpp"

#include <cmath>
#include <string>

namespace cell::frames {
namespace {

constexpr double kMetersToMm = 1000.0;
constexpr double kQuatNormTol = 1e-9;

void check_quaternion(const Eigen::Quaterniond& q) {
  if (!q.coeffs().allFinite()) throw InvalidPose("non-finite orientation");
  if (std::abs(q.norm() - 1.0) > kQuatNormTol) throw InvalidPose("orientation is not a unit quaternion");
}

// A rotation's axis is a pseudovector: under an improper change of basis it
// picks up the determinant as an extra sign.
Eigen::Quaterniond change_basis(const Eigen::Quaterniond& q, const Eigen::Matrix3d& m, int det) {
  const Eigen::Vector3d v = static_cast<double>(det) * (m * q.vec());
  return Eigen::Quaterniond(q.w(), v.x(), v.y(), v.z());
}

}  // namespace

AxisPermutation::AxisPermutation()
    : AxisPermutation((Eigen::Matrix3d() << 0, 0, 1, -1, 0, 0, 0, 1, 0).finished()) {}

AxisPermutation::AxisPermutation(const Eigen::Matrix3d& m)
    : m_(m), det_(m.determinant() > 0 ? 1 : -1) {}

AxisPermutation AxisPermutation::from_row_major(std::span<const int> entries) {
  if (entries.size() != 9) throw ConfigError("frame.permutation needs nine integers");
  Eigen::Matrix3d m;
  for (int r = 0; r < 3; ++r) {
    int nonzero = 0;
    for (int c = 0; c < 3; ++c) {
      const int v = entries[static_cast<size_t>(r * 3 + c)];
      if (v < -1 || v > 1) throw ConfigError("frame.permutation entries must be -1, 0 or 1");
      nonzero += v != 0;
      m(r, c) = v;
    }
    if (nonzero != 1) throw ConfigError("frame.permutation row " + std::to_string(r) + " is not a signed unit axis");
  }
  for (int c = 0; c < 3; ++c) {
    if (m.col(c).cwiseAbs().sum() != 1.0) throw ConfigError("frame.permutation is not a permutation");
  }
  return AxisPermutation(m);
}

RobotPose ar_to_robot(const ArPose& p, const AxisPermutation& perm) {
  if (!p.position_m.allFinite()) throw InvalidPose("non-finite position");
  check_quaternion(p.orientation);
  RobotPose out;
  out.position_mm = kMetersToMm * (perm.matrix() * p.position_m);
  out.orientation = change_basis(p.orientation, perm.matrix(), perm.determinant());
  return out;
}

ArPose robot_to_ar(const RobotPose& p, const AxisPermutation& perm) {
  if (!p.position_mm.allFinite()) throw InvalidPose("non-finite position");
  check_quaternion(p.orientation);
  const Eigen::Matrix3d inv = perm.matrix().transpose();
  ArPose out;
  out.position_m = (inv * p.position_mm) / kMetersToMm;
  out.orientation = change_basis(p.orientation, inv, perm.determinant());
  return out;
}

Eigen::Vector3d unit_axis(JointAxis axis) {
  switch (axis) {
    case JointAxis::X: return Eigen::Vector3d::UnitX();
    case JointAxis::Y: return Eigen::Vector3d::UnitY();
    case JointAxis::Z: return Eigen::Vector3d::UnitZ();
  }
  return Eigen::Vector3d::UnitZ();
}

Eigen::Vector3d joint_map(double theta_deg, JointAxis axis) {
  return -theta_deg * unit_axis(axis);
}

}  // namespace cell::frames
