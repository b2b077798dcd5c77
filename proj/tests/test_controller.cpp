#include "doctest.h"

#include "cell/controller.hpp"
#include "cell/error.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <random>

using namespace cell;
using namespace cell::control;
using kinematics::ArmModel;

namespace {

constexpr std::uint64_t kCycleUs = 4000;

Controller make(JointVector start = Controller::default_start(), SafetyConfig s = {}) {
  Controller c(ArmModel::default_model(), s, start);
  c.connect();
  return c;
}

RobotPose shifted(const RobotPose& p, const Eigen::Vector3d& d) {
  RobotPose out = p;
  out.position_mm += d;
  return out;
}

bool has_error(const std::vector<ControllerEvent>& events, ErrorCode code) {
  for (const auto& e : events)
    if (const auto* r = std::get_if<ErrorRaised>(&e); r && r->code == code) return true;
  return false;
}

}  // namespace

TEST_CASE("one cycle toward a target 1 mm away moves exactly 0.2 mm") {
  Controller c = make();
  const RobotPose start = c.state().pose;
  c.set_target(shifted(start, {1.0, 0.0, 0.0}), 0);
  c.step();
  const double moved = (c.state().pose.position_mm - start.position_mm).norm();
  CHECK(moved == doctest::Approx(50.0 * 0.004).epsilon(1e-12));
  CHECK(c.state().mode == Mode::Executing);
}

TEST_CASE("stationary target is a fixed point") {
  Controller c = make();
  const ControllerState before = c.state();
  c.set_target(before.pose, 0);
  for (int i = 0; i < 100; ++i) c.step();
  CHECK(c.state().q == before.q);
  CHECK(c.state().pose == before.pose);
  CHECK(c.state().mode == Mode::Ready);
}

TEST_CASE("low-pass coefficient") {
  const double rc = 1.0 / (2.0 * std::numbers::pi * 100.0);
  CHECK(lp_alpha(100.0, 0.004) == doctest::Approx(0.004 / (0.004 + rc)).epsilon(1e-15));
  CHECK(lp_alpha(100.0, 0.004) == doctest::Approx(0.71537).epsilon(1e-5));

  RobotPose zero, one;
  one.position_mm = Eigen::Vector3d(1.0, 1.0, 1.0);
  const RobotPose y = lp_filter(zero, one, 0.004, 100.0);
  CHECK(y.position_mm.x() == doctest::Approx(0.71537).epsilon(1e-5));
}

TEST_CASE("low-pass has unit DC gain") {
  RobotPose y, x;
  x.position_mm = Eigen::Vector3d(3.0, -2.0, 7.0);
  x.orientation = Eigen::Quaterniond(Eigen::AngleAxisd(0.5, Eigen::Vector3d::UnitZ()));
  for (int i = 0; i < 200; ++i) y = lp_filter(y, x, 0.004, 100.0);
  CHECK((y.position_mm - x.position_mm).norm() < 1e-12);
  CHECK(angular_distance(y.orientation, x.orientation) < 1e-9);
}

TEST_CASE("low-pass attenuates the Nyquist tone") {
  RobotPose y, x;
  double peak = 0.0;
  for (int i = 0; i < 400; ++i) {
    x.position_mm.x() = (i % 2 == 0) ? 1.0 : -1.0;
    y = lp_filter(y, x, 0.004, 100.0);
    if (i > 200) peak = std::max(peak, std::abs(y.position_mm.x()));
  }
  // Steady state of y[n] = (1-a) y[n-1] + a x[n] for x alternating: a / (2 - a).
  const double a = lp_alpha(100.0, 0.004);
  CHECK(peak == doctest::Approx(a / (2.0 - a)).epsilon(1e-9));
  CHECK(peak < 1.0);
}

TEST_CASE("low-pass output energy never exceeds input energy") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> in(512);
    double mean = 0.0;
    for (double& v : in) mean += (v = n(rng));
    mean /= static_cast<double>(in.size());
    for (double& v : in) v -= mean;
    RobotPose y, x;
    double e_in = 0.0, e_out = 0.0;
    for (double v : in) {
      x.position_mm.x() = v;
      y = lp_filter(y, x, 0.004, 100.0);
      e_in += v * v;
      e_out += y.position_mm.x() * y.position_mm.x();
    }
    CHECK(e_out <= e_in);
  }
}

TEST_CASE("per-cycle translation is bounded for adversarial streams") {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> jump(-400.0, 400.0);
  std::uniform_int_distribution<int> kind(0, 9);
  Controller c = make();
  const RobotPose home = c.state().pose;
  const double bound = 50.0 * 0.004 + 1e-9;
  double worst = 0.0;
  std::uint64_t t = 0;
  for (int i = 0; i < 20000; ++i) {
    t += kCycleUs;
    RobotPose target = home;
    switch (kind(rng)) {
      case 0: target.position_mm.x() = std::numeric_limits<double>::quiet_NaN(); break;
      case 1: target.position_mm = Eigen::Vector3d(5000.0, 0.0, 0.0); break;
      case 2: target.orientation = Eigen::Quaterniond::UnitRandom(); break;
      default: target.position_mm += Eigen::Vector3d(jump(rng), jump(rng), jump(rng)) * 0.25; break;
    }
    c.set_target(target, t, static_cast<std::uint32_t>(i));
    const Eigen::Vector3d before = c.state().pose.position_mm;
    c.step();
    worst = std::max(worst, (c.state().pose.position_mm - before).norm());
    if (c.state().mode == Mode::Error) c.restart();
  }
  CHECK(worst <= bound);
}

TEST_CASE("orientation step is bounded by the orientation rate") {
  Controller c = make();
  RobotPose target = c.state().pose;
  target.orientation = target.orientation * Eigen::Quaterniond(Eigen::AngleAxisd(0.3, Eigen::Vector3d::UnitX()));
  c.set_target(target, 0);
  const Eigen::Quaterniond before = c.state().pose.orientation;
  c.step();
  CHECK(angular_distance(before, c.state().pose.orientation) ==
        doctest::Approx(25.0 * 0.004 * kinematics::kDegToRad).epsilon(1e-9));
}

TEST_CASE("driving through the wrist singularity raises 50456 at the crossing") {
  const ArmModel arm = ArmModel::default_model();
  JointVector goal = Controller::default_start();
  goal[4] = -30.0;
  Controller c = make();
  c.set_target(kinematics::fk(arm, goal), 0);
  double last_q5 = c.state().q[4];
  int cycles = 0;
  while (c.state().mode != Mode::Error && cycles < 2000) {
    last_q5 = c.state().q[4];
    c.set_target(kinematics::fk(arm, goal), static_cast<std::uint64_t>(cycles) * kCycleUs);
    c.step();
    ++cycles;
  }
  REQUIRE(c.state().mode == Mode::Error);
  CHECK(c.state().active_error->code == ErrorCode::ProximityToSingularity);
  // The last committed configuration is still on the starting side and within one
  // cycle of the crossing.
  CHECK(last_q5 > 0.0);
  CHECK(last_q5 < 0.5);
  CHECK(c.state().q[4] == last_q5);
}

TEST_CASE("path past a joint limit raises 50027") {
  const ArmModel arm = ArmModel::default_model();
  JointVector start = {0.0, 127.0, -60.0, 0.0, 40.0, 0.0};
  JointVector goal = start;
  goal[1] = 135.0;
  Controller c = make(start);
  int cycles = 0;
  while (c.state().mode != Mode::Error && cycles < 5000) {
    c.set_target(kinematics::fk(arm, goal), static_cast<std::uint64_t>(cycles) * kCycleUs);
    c.step();
    ++cycles;
  }
  REQUIRE(c.state().mode == Mode::Error);
  CHECK(c.state().active_error->code == ErrorCode::JointOutOfRange);
  CHECK(arm.within_limits(c.state().q));
}

TEST_CASE("sustained over-speed raises 90515 and short bursts do not") {
  SUBCASE("300 mm/s for 0.4 s") {
    Controller c = make();
    RobotPose target = c.state().pose;
    std::vector<ControllerEvent> events;
    for (int i = 0; i < 100; ++i) {
      target.position_mm.x() -= 300.0 * 0.004;
      c.set_target(target, static_cast<std::uint64_t>(i) * kCycleUs);
      c.step();
      for (auto& e : c.drain_events()) events.push_back(e);
    }
    CHECK(c.state().mode == Mode::Error);
    CHECK(c.state().active_error->code == ErrorCode::SpeedViolation);
    CHECK(has_error(events, ErrorCode::SpeedViolation));
  }
  SUBCASE("300 mm/s for 0.2 s then still") {
    Controller c = make();
    RobotPose target = c.state().pose;
    for (int i = 0; i < 300; ++i) {
      if (i < 50) target.position_mm.x() -= 300.0 * 0.004;
      c.set_target(target, static_cast<std::uint64_t>(i) * kCycleUs);
      c.step();
    }
    CHECK(c.state().mode != Mode::Error);
  }
  SUBCASE("150 mm/s is clamped silently") {
    Controller c = make();
    RobotPose target = c.state().pose;
    for (int i = 0; i < 250; ++i) {
      target.position_mm.x() -= 150.0 * 0.004;
      c.set_target(target, static_cast<std::uint64_t>(i) * kCycleUs);
      c.step();
    }
    CHECK(c.state().mode == Mode::Executing);
  }
}

TEST_CASE("command silence holds the pose") {
  Controller c = make();
  c.set_target(shifted(c.state().pose, {-100.0, 0.0, 0.0}), 0);
  for (int i = 0; i < 125; ++i) c.step();  // 500 ms
  const RobotPose held = c.state().pose;
  const JointVector held_q = c.state().q;
  for (int i = 0; i < 250; ++i) {
    c.step();
    CHECK(c.state().pose == held);
  }
  CHECK(c.state().q == held_q);
  CHECK(c.state().mode == Mode::Ready);
}

TEST_CASE("state machine") {
  Controller c(ArmModel::default_model(), {});
  CHECK(c.state().mode == Mode::Disconnected);
  const RobotPose start = c.state().pose;
  c.set_target(shifted(start, {-1.0, 0, 0}), 0);
  c.step();
  CHECK(c.state().pose == start);  // no motion while disconnected

  c.connect();
  CHECK(c.state().mode == Mode::Ready);
  c.connect();
  CHECK(c.state().mode == Mode::Ready);
  CHECK(c.restart() == Mode::Ready);

  c.set_target(shifted(start, {-1.0, 0, 0}), 0);
  c.step();
  CHECK(c.state().mode == Mode::Executing);

  for (ErrorCode code : {ErrorCode::EmergencyStop, ErrorCode::SpeedViolation, ErrorCode::ProximityToSingularity,
                         ErrorCode::JointOutOfRange, ErrorCode::JointLoadTooHigh}) {
    c.inject_fault(code);
    CHECK(c.state().mode == Mode::Error);
    REQUIRE(c.state().active_error.has_value());
    CHECK(c.state().active_error->code == code);
    CHECK(c.restart() == Mode::Ready);
    CHECK_FALSE(c.state().active_error.has_value());
  }

  c.disconnect();
  CHECK(c.state().mode == Mode::Disconnected);
  auto events = c.drain_events();
  CHECK_FALSE(events.empty());
  CHECK(c.drain_events().empty());
}

TEST_CASE("gripper") {
  Controller c = make();
  CHECK(c.state().gripper == GripperState::Open);
  CHECK(c.gripper_command(wire::GripperAction::Close) == GripperAck::Applied);
  CHECK(c.state().gripper == GripperState::Closed);
  CHECK(c.gripper_command(wire::GripperAction::Close) == GripperAck::Unchanged);
  CHECK(c.gripper_command(wire::GripperAction::Hold) == GripperAck::Unchanged);
  CHECK(c.gripper_command(wire::GripperAction::Open) == GripperAck::Applied);
  c.inject_fault(ErrorCode::EmergencyStop);
  CHECK(c.gripper_command(wire::GripperAction::Close) == GripperAck::RejectedError);
  CHECK(c.state().gripper == GripperState::Open);
  c.disconnect();
  CHECK(c.gripper_command(wire::GripperAction::Close) == GripperAck::RejectedDisconnected);
}

TEST_CASE("controller is deterministic") {
  auto run = [] {
    std::mt19937_64 rng(13);
    std::uniform_real_distribution<double> d(-2.0, 2.0);
    Controller c = make();
    RobotPose target = c.state().pose;
    std::vector<JointVector> trace;
    for (int i = 0; i < 2000; ++i) {
      target.position_mm += Eigen::Vector3d(d(rng), d(rng), d(rng)) * 0.1;
      c.set_target(target, static_cast<std::uint64_t>(i) * kCycleUs);
      c.step();
      trace.push_back(c.state().q);
    }
    return trace;
  };
  CHECK(run() == run());
}

TEST_CASE("feedback mirrors the state") {
  Controller c = make();
  c.set_target(shifted(c.state().pose, {-1.0, 0, 0}), 0, 77);
  c.step();
  const wire::Feedback f = c.feedback(9, 1234);
  CHECK(f.seq == 9);
  CHECK(f.timestamp_us == 1234);
  CHECK(f.echo_seq == 77);
  CHECK(f.state == wire::WireState::Executing);
  CHECK(f.joints_deg == c.state().q);
  CHECK(f.actual == c.state().pose);
}

TEST_CASE("safety config validation") {
  SafetyConfig s;
  s.lp_cutoff_hz = 0.0;
  CHECK_THROWS_AS(s.validate(), ConfigError);
  CHECK_THROWS_AS(Controller(ArmModel::default_model(), s), ConfigError);
}
