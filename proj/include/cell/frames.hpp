#pragma once

#include "cell/pose.hpp"

#include <Eigen/Core>

#include <array>
#include <span>

namespace cell::frames {

/// Signed axis permutation taking AR coordinates to robot coordinates.
/// Every row and column holds exactly one +1 or -1.
class AxisPermutation {
public:
  /// x_r = z_u, y_r = -x_u, z_r = y_u.
  AxisPermutation();

  /// Row-major nine entries; throws ConfigError unless it is a signed permutation.
  static AxisPermutation from_row_major(std::span<const int> entries);

  const Eigen::Matrix3d& matrix() const { return m_; }
  /// +1 keeps handedness, -1 flips it.
  int determinant() const { return det_; }

private:
  explicit AxisPermutation(const Eigen::Matrix3d& m);

  Eigen::Matrix3d m_;
  int det_;
};

/// Converts an AR-side pose to the robot frame (m -> mm). Throws InvalidPose on
/// non-finite values or a non-unit quaternion.
RobotPose ar_to_robot(const ArPose& p, const AxisPermutation& perm = AxisPermutation{});

/// Exact inverse of ar_to_robot.
ArPose robot_to_ar(const RobotPose& p, const AxisPermutation& perm = AxisPermutation{});

enum class JointAxis { X, Y, Z };

/// Rotation axis of each joint of the AR-side model.
using JointMapSpec = std::array<JointAxis, 6>;

Eigen::Vector3d unit_axis(JointAxis axis);

/// Local Euler vector (degrees) for the AR-side joint transform. Joint rotation
/// directions are opposite between the two sides, hence the negation.
Eigen::Vector3d joint_map(double theta_deg, JointAxis axis);

}  // namespace cell::frames
