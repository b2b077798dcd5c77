#include "cell/controller.hpp"

#include "cell/error.hpp"

#include <cmath>
#include <numbers>

namespace cell::control {

void SafetyConfig::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0)) throw ConfigError(std::string(name) + " must be > 0");
  };
  positive(max_speed_deviation_mm_s, "safety.max_speed_deviation_mm_s");
  positive(lp_cutoff_hz, "safety.lp_cutoff_hz");
  positive(max_orient_rate_deg_s, "safety.max_orient_rate_deg_s");
  positive(speed_violation_factor, "safety.speed_violation_factor");
  positive(speed_violation_window_s, "safety.speed_violation_window_s");
  positive(hold_timeout_s, "wire.hold_timeout_ms");
  if (!(w_min >= 0.0)) throw ConfigError("kinematics.w_min must be >= 0");
}

std::string to_string(Mode m) {
  switch (m) {
    case Mode::Disconnected: return "DISCONNECTED";
    case Mode::Ready: return "READY";
    case Mode::Executing: return "EXECUTING";
    case Mode::Error: return "ERROR";
  }
  return "DISCONNECTED";
}

std::string to_string(GripperState g) { return g == GripperState::Open ? "OPEN" : "CLOSED"; }

double lp_alpha(double cutoff_hz, double dt) {
  const double rc = 1.0 / (2.0 * std::numbers::pi * cutoff_hz);
  return dt / (rc + dt);
}

RobotPose lp_filter(const RobotPose& previous, const RobotPose& raw, double dt, double cutoff_hz) {
  const double alpha = lp_alpha(cutoff_hz, dt);
  RobotPose out;
  out.position_mm = previous.position_mm + alpha * (raw.position_mm - previous.position_mm);
  out.orientation = previous.orientation.coeffs() == raw.orientation.coeffs()
                        ? previous.orientation
                        : previous.orientation.slerp(alpha, raw.orientation).normalized();
  return out;
}

Controller::Controller(kinematics::ArmModel model, SafetyConfig safety, JointVector start_q)
    : model_(std::move(model)), safety_(safety) {
  model_.validate();
  safety_.validate();
  state_.q = start_q;
  state_.pose = kinematics::fk(model_, start_q);
  reseed();
}

void Controller::reseed() {
  target_ = state_.pose;
  filtered_ = state_.pose;
  since_target_s_ = 0.0;
  holding_ = false;
  last_observed_.reset();
  overspeed_since_us_.reset();
  speed_violation_pending_ = false;
  det_sign_ = kinematics::jacobian_determinant(model_, state_.q) >= 0.0 ? 1.0 : -1.0;
}

void Controller::set_mode(Mode m) {
  if (state_.mode == m) return;
  state_.mode = m;
  events_.emplace_back(ModeChanged{m});
}

void Controller::raise(ErrorCode code, std::string detail) {
  state_.active_error = ActiveError{code, detail};
  events_.emplace_back(ErrorRaised{code, std::move(detail)});
  set_mode(Mode::Error);
}

void Controller::connect() {
  if (state_.mode != Mode::Disconnected) return;
  reseed();
  set_mode(Mode::Ready);
}

void Controller::disconnect() {
  state_.active_error.reset();
  set_mode(Mode::Disconnected);
}

Mode Controller::restart() {
  if (state_.mode == Mode::Error) {
    state_.active_error.reset();
    reseed();
    set_mode(Mode::Ready);
  }
  return state_.mode;
}

void Controller::set_target(const RobotPose& target, std::uint64_t t_us, std::uint32_t seq) {
  if (!target.finite() || target.orientation.norm() < 1e-9) return;
  RobotPose t = target;
  t.orientation.normalize();
  target_ = t;
  state_.echo_seq = seq;
  since_target_s_ = 0.0;
  holding_ = false;

  if (last_observed_ && t_us > last_observed_us_) {
    const double dt = static_cast<double>(t_us - last_observed_us_) * 1e-6;
    const double limit = safety_.speed_violation_factor * safety_.max_speed_deviation_mm_s;
    const double v = (t.position_mm - last_observed_->position_mm).norm() / dt;
    if (dt > 0.1 || v <= limit) {
      overspeed_since_us_.reset();
    } else if (!overspeed_since_us_) {
      overspeed_since_us_ = last_observed_us_;
    } else if (static_cast<double>(t_us - *overspeed_since_us_) * 1e-6 > safety_.speed_violation_window_s) {
      speed_violation_pending_ = true;
    }
  }
  if (!last_observed_ || t_us > last_observed_us_) {
    last_observed_ = t;
    last_observed_us_ = t_us;
  }
}

void Controller::step(double dt) {
  if (state_.mode == Mode::Disconnected || state_.mode == Mode::Error) return;

  if (speed_violation_pending_) {
    raise(ErrorCode::SpeedViolation, "target speed above supervision limit for longer than the window");
    return;
  }

  since_target_s_ += dt;
  if (!holding_ && since_target_s_ >= safety_.hold_timeout_s) {
    // Command silence: stop where we are rather than chase a stale target.
    holding_ = true;
    target_ = state_.pose;
    filtered_ = state_.pose;
  }

  if (target_.position_mm.norm() > model_.max_reach_mm()) {
    raise(ErrorCode::Unknown, "target outside the reachable workspace");
    return;
  }

  filtered_ = lp_filter(filtered_, target_, dt, safety_.lp_cutoff_hz);

  RobotPose next = state_.pose;
  Eigen::Vector3d delta = filtered_.position_mm - state_.pose.position_mm;
  const double max_step = safety_.max_speed_deviation_mm_s * dt;
  const double dist = delta.norm();
  if (dist > max_step) delta *= max_step / dist;
  next.position_mm = state_.pose.position_mm + delta;

  constexpr double kAngleEps = 1e-12;
  double angle = angular_distance(state_.pose.orientation, filtered_.orientation);
  if (angle < kAngleEps) angle = 0.0;
  const double max_rot = safety_.max_orient_rate_deg_s * kinematics::kDegToRad * dt;
  if (angle > 0.0) {
    const double frac = angle > max_rot ? max_rot / angle : 1.0;
    next.orientation = state_.pose.orientation.slerp(frac, filtered_.orientation).normalized();
  }

  if (delta.isZero(0.0) && angle == 0.0) {
    set_mode(Mode::Ready);
    return;
  }

  const auto res = kinematics::ik(model_, next, state_.q);
  switch (res.status) {
    case kinematics::IkStatus::Ok: break;
    case kinematics::IkStatus::JointLimit:
      raise(ErrorCode::JointOutOfRange, "commanded pose needs a joint outside its range");
      return;
    case kinematics::IkStatus::Unreachable:
    case kinematics::IkStatus::NoConvergence:
      raise(ErrorCode::Unknown, "inverse kinematics failed: " + kinematics::to_string(res.status));
      return;
  }

  const double det = kinematics::jacobian_determinant(model_, res.q);
  const double sign = det >= 0.0 ? 1.0 : -1.0;
  if (std::abs(det) < safety_.w_min || sign != det_sign_) {
    raise(ErrorCode::ProximityToSingularity, "manipulability collapsed along the commanded path");
    return;
  }

  state_.q = res.q;
  state_.pose = next;
  set_mode(Mode::Executing);
}

GripperAck Controller::gripper_command(wire::GripperAction action) {
  if (action == wire::GripperAction::Hold) return GripperAck::Unchanged;
  if (state_.mode == Mode::Error) return GripperAck::RejectedError;
  if (state_.mode == Mode::Disconnected) return GripperAck::RejectedDisconnected;
  const GripperState want = action == wire::GripperAction::Open ? GripperState::Open : GripperState::Closed;
  if (state_.gripper == want) return GripperAck::Unchanged;
  state_.gripper = want;
  events_.emplace_back(GripperChanged{want});
  return GripperAck::Applied;
}

void Controller::inject_fault(ErrorCode code, std::string detail) {
  if (detail.empty()) detail = "injected fault";
  raise(code, std::move(detail));
}

wire::Feedback Controller::feedback(std::uint32_t seq, std::uint64_t timestamp_us) const {
  wire::Feedback f;
  f.seq = seq;
  f.timestamp_us = timestamp_us;
  f.joints_deg = state_.q;
  f.actual = state_.pose;
  switch (state_.mode) {
    case Mode::Executing: f.state = wire::WireState::Executing; break;
    case Mode::Error: f.state = wire::WireState::Error; break;
    default: f.state = wire::WireState::Ready; break;
  }
  f.echo_seq = state_.echo_seq;
  return f;
}

std::vector<ControllerEvent> Controller::drain_events() {
  std::vector<ControllerEvent> out;
  out.swap(events_);
  return out;
}

}  // namespace cell::control
