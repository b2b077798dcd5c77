#pragma once

#include "cell/pose.hpp"

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <array>
#include <iosfwd>
#include <string>

namespace cell::kinematics {

/// One modified (Craig) DH row: Rx(alpha) * Tx(a) * Rz(theta + offset) * Tz(d).
struct DhRow {
  double a_mm = 0.0;
  double alpha_rad = 0.0;
  double d_mm = 0.0;
  double theta_offset_rad = 0.0;
};

struct JointLimit {
  double min_deg = -180.0;
  double max_deg = 180.0;
};

using Jacobian = Eigen::Matrix<double, 6, 6>;

struct ArmModel {
  std::string id = "desk6r";
  std::array<DhRow, 6> dh{};
  std::array<JointLimit, 6> limits{};
  /// Flange-to-TCP offset along the last joint's z axis.
  double tool_mm = 0.0;

  /// Upper bound on |TCP position| from the base origin.
  double max_reach_mm() const;
  bool within_limits(const JointVector& q) const;
  /// Throws ConfigError when a limit is inverted or the reach is zero.
  void validate() const;

  /// Desk-scale 6R spherical-wrist arm. Placeholder geometry, not vendor data.
  static ArmModel default_model();
  /// Reads "dh a alpha_deg d offset_deg", "limit min max", "tool d" lines.
  static ArmModel parse(std::istream& in);
  static ArmModel load(const std::string& path);
};

RobotPose fk(const ArmModel& model, const JointVector& q);

/// Geometric Jacobian in the base frame: rows 0-2 linear (mm/rad), rows 3-5
/// angular (rad/rad).
Jacobian jacobian(const ArmModel& model, const JointVector& q);

/// Yoshikawa measure sqrt(det(J J^T)). J is square, so this is |det J|, which
/// is what gets evaluated (no squaring of the condition number).
double manipulability(const ArmModel& model, const JointVector& q);

/// det J with sign; flips sign when a trajectory crosses a singular surface.
double jacobian_determinant(const ArmModel& model, const JointVector& q);

enum class IkStatus { Ok, Unreachable, NoConvergence, JointLimit };

std::string to_string(IkStatus s);

struct IkResult {
  IkStatus status = IkStatus::Ok;
  JointVector q{};
  int iterations = 0;
  double position_error_mm = 0.0;
  double orientation_error_deg = 0.0;

  bool ok() const { return status == IkStatus::Ok; }
};

struct IkOptions {
  double damping = 0.01;
  int max_iterations = 100;
  double position_tol_mm = 0.1;
  double orientation_tol_deg = 0.1;
};

/// Damped least squares from `seed`. The result never gets clamped: a solution
/// outside the joint limits is reported as JointLimit with the offending q.
IkResult ik(const ArmModel& model, const RobotPose& target, const JointVector& seed, const IkOptions& opts = {});

inline constexpr double kDegToRad = 0.017453292519943295;
inline constexpr double kRadToDeg = 57.29577951308232;

}  // namespace cell::kinematics
