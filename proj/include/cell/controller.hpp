#pragma once

#include "cell/error_codes.hpp"
#include "cell/kinematics.hpp"
#include "cell/pose.hpp"
#include "cell/wire.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace cell::control {

inline constexpr double kCycleS = 0.004;

struct SafetyConfig {
  double max_speed_deviation_mm_s = 50.0;
  double lp_cutoff_hz = 100.0;
  double max_orient_rate_deg_s = 25.0;
  /// Speed Violation fires when the streamed target moves faster than
  /// factor * max_speed_deviation for longer than the window.
  double speed_violation_factor = 4.0;
  double speed_violation_window_s = 0.25;
  double hold_timeout_s = 0.5;
  /// Manipulability floor (mm^3 units for the default model).
  double w_min = 1e-4;

  void validate() const;
};

enum class Mode { Disconnected, Ready, Executing, Error };
enum class GripperState { Open, Closed };

std::string to_string(Mode m);
std::string to_string(GripperState g);

struct ActiveError {
  ErrorCode code = ErrorCode::Unknown;
  std::string detail;
};

struct ControllerState {
  Mode mode = Mode::Disconnected;
  std::optional<ActiveError> active_error;
  JointVector q{};
  RobotPose pose;
  GripperState gripper = GripperState::Open;
  std::uint32_t echo_seq = 0;
};

struct ModeChanged {
  Mode mode;
};
struct ErrorRaised {
  ErrorCode code;
  std::string detail;
};
struct GripperChanged {
  GripperState state;
};
using ControllerEvent = std::variant<ModeChanged, ErrorRaised, GripperChanged>;

/// Smoothing factor of the first-order low-pass: dt / (RC + dt), RC = 1/(2 pi fc).
double lp_alpha(double cutoff_hz, double dt);

/// One IIR update y <- y + alpha (x - y) per translation axis, and the same
/// fraction of the relative rotation angle for orientation.
RobotPose lp_filter(const RobotPose& previous, const RobotPose& raw, double dt, double cutoff_hz);

enum class GripperAck { Applied, Unchanged, RejectedError, RejectedDisconnected };

/// Simulated position-stream controller. Single-threaded and deterministic:
/// identical inputs give identical state trajectories.
class Controller {
public:
  Controller(kinematics::ArmModel model, SafetyConfig safety, JointVector start_q = default_start());

  static JointVector default_start() { return {0.0, 0.0, 0.0, 0.0, 30.0, 0.0}; }

  const ControllerState& state() const { return state_; }
  const kinematics::ArmModel& model() const { return model_; }
  const SafetyConfig& safety() const { return safety_; }
  const RobotPose& target() const { return target_; }

  /// DISCONNECTED -> READY; idempotent otherwise.
  void connect();
  void disconnect();
  /// Clears an active error; a no-op outside ERROR. Returns the resulting mode.
  Mode restart();

  /// Latest streamed target. `t_us` is the sender timestamp used to supervise
  /// target velocity. Non-finite targets are ignored.
  void set_target(const RobotPose& target, std::uint64_t t_us, std::uint32_t seq = 0);

  /// Advance one control cycle toward the latest target.
  void step(double dt = kCycleS);

  GripperAck gripper_command(wire::GripperAction action);
  void inject_fault(ErrorCode code, std::string detail = {});

  wire::Feedback feedback(std::uint32_t seq, std::uint64_t timestamp_us) const;

  /// Events since the previous drain, in emission order.
  std::vector<ControllerEvent> drain_events();

private:
  void set_mode(Mode m);
  void raise(ErrorCode code, std::string detail);
  void reseed();

  kinematics::ArmModel model_;
  SafetyConfig safety_;
  ControllerState state_;
  RobotPose target_;
  RobotPose filtered_;
  double det_sign_ = 1.0;
  double since_target_s_ = 0.0;
  bool holding_ = false;

  std::optional<RobotPose> last_observed_;
  std::uint64_t last_observed_us_ = 0;
  std::optional<std::uint64_t> overspeed_since_us_;
  bool speed_violation_pending_ = false;

  std::vector<ControllerEvent> events_;
};

}  // namespace cell::control
