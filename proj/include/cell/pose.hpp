#pragma once

#include <Eigen/Geometry>

#include <array>

namespace cell {

/// Tool center point pose on the robot side: millimeters, right-handed
/// (x forward, y left, z up), unit quaternion.
struct RobotPose {
  Eigen::Vector3d position_mm = Eigen::Vector3d::Zero();
  Eigen::Quaterniond orientation = Eigen::Quaterniond::Identity();

  bool finite() const;
  bool operator==(const RobotPose& other) const;
};

/// AR-side pose: meters, left-handed (x right, y up, z forward).
struct ArPose {
  Eigen::Vector3d position_m = Eigen::Vector3d::Zero();
  Eigen::Quaterniond orientation = Eigen::Quaterniond::Identity();

  bool finite() const;
};

/// Six joint angles in degrees.
using JointVector = std::array<double, 6>;

/// Angle of the relative rotation between two orientations, radians in [0, pi].
double angular_distance(const Eigen::Quaterniond& a, const Eigen::Quaterniond& b);

}  // namespace cell
