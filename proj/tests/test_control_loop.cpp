#include "doctest.h"

#include "cell/control_loop.hpp"

#include <algorithm>
#include <chrono>
#include <thread>

using namespace cell;
using namespace cell::control;
using namespace std::chrono_literals;
using clock_type = std::chrono::steady_clock;

namespace {

Controller fresh() { return Controller(kinematics::ArmModel::default_model(), {}); }

wire::Command command(std::uint32_t seq, const RobotPose& target) {
  wire::Command c;
  c.seq = seq;
  c.timestamp_us = wire::monotonic_us();
  c.target = target;
  return c;
}

void wait_cycles(const ControlLoop& loop, std::uint64_t n) {
  const std::uint64_t until = loop.snapshot().cycle + n;
  while (loop.snapshot().cycle < until) std::this_thread::sleep_for(1ms);
}

// Drains feedback until `pred` holds or the timeout passes.
template <typename P>
std::optional<wire::Feedback> await(CommandClient& client, P pred, std::chrono::milliseconds timeout) {
  const auto deadline = clock_type::now() + timeout;
  while (clock_type::now() < deadline) {
    auto fb = client.receive(20ms);
    if (fb && pred(*fb)) return fb;
  }
  return std::nullopt;
}

}  // namespace

TEST_CASE("first command connects and stale sequence numbers are dropped") {
  ControlLoop loop(fresh());
  const RobotPose home = loop.snapshot().state.pose;
  loop.start();
  CHECK(loop.snapshot().state.mode == Mode::Disconnected);

  RobotPose a = home, b = home;
  a.position_mm.x() -= 1.0;
  b.position_mm.x() -= 5.0;
  loop.submit(command(5, a), "peer");
  loop.submit(command(4, b), "peer");
  wait_cycles(loop, 3);
  const Snapshot s = loop.snapshot();
  CHECK(s.state.mode != Mode::Disconnected);
  CHECK(s.state.echo_seq == 5);
  CHECK(s.target.position_mm == a.position_mm);
  CHECK(loop.applied_commands() == 1);
  CHECK(loop.stale_commands() == 1);

  // A second sender keeps its own sequence.
  loop.submit(command(1, b), "other");
  wait_cycles(loop, 3);
  CHECK(loop.snapshot().state.echo_seq == 1);
  CHECK(loop.applied_commands() == 2);
  loop.stop();
}

TEST_CASE("explicit disconnect suppresses auto-connect until the next connect") {
  ControlLoop loop(fresh());
  const RobotPose home = loop.snapshot().state.pose;
  loop.start();
  CHECK(loop.connect() == Mode::Ready);
  CHECK(loop.disconnect() == Mode::Disconnected);
  loop.submit(command(1, home), "peer");
  wait_cycles(loop, 3);
  CHECK(loop.snapshot().state.mode == Mode::Disconnected);
  CHECK(loop.applied_commands() == 0);
  CHECK(loop.connect() == Mode::Ready);
  loop.submit(command(2, home), "peer");
  wait_cycles(loop, 3);
  CHECK(loop.applied_commands() == 1);
  loop.stop();
}

TEST_CASE("service requests run inline when the loop is stopped") {
  ControlLoop loop(fresh());
  CHECK(loop.connect() == Mode::Ready);
  CHECK(loop.gripper(wire::GripperAction::Close) == GripperAck::Applied);
  loop.inject_fault(ErrorCode::EmergencyStop);
  CHECK(loop.snapshot().state.mode == Mode::Error);
  CHECK(loop.gripper(wire::GripperAction::Open) == GripperAck::RejectedError);
  CHECK(loop.restart() == Mode::Ready);
}

TEST_CASE("event listeners see every transition in order") {
  ControlLoop loop(fresh());
  std::vector<std::string> seen;
  std::mutex mu;
  loop.add_event_listener([&](const ControllerEvent& e, const ControllerState&) {
    std::lock_guard lk(mu);
    if (const auto* m = std::get_if<ModeChanged>(&e)) seen.push_back(to_string(m->mode));
    if (const auto* r = std::get_if<ErrorRaised>(&e)) seen.push_back(std::to_string(static_cast<int>(r->code)));
  });
  loop.start();
  loop.connect();
  loop.inject_fault(ErrorCode::EmergencyStop);
  loop.restart();
  loop.disconnect();
  loop.stop();
  const std::vector<std::string> expected = {"READY", "90518", "ERROR", "READY", "DISCONNECTED"};
  CHECK(seen == expected);
}

TEST_CASE("full inbox drops the oldest command") {
  ControlLoop loop(fresh(), LoopConfig{250.0, 4});
  const RobotPose home = loop.snapshot().state.pose;
  for (std::uint32_t i = 1; i <= 10; ++i) loop.submit(command(i, home), "peer");
  CHECK(loop.dropped_commands() == 6);
  loop.start();
  wait_cycles(loop, 2);
  CHECK(loop.snapshot().state.echo_seq == 10);
  CHECK(loop.applied_commands() == 4);
  loop.stop();
}

TEST_CASE("UDP round trip") {
  ControlLoop loop(fresh());
  const RobotPose home = loop.snapshot().state.pose;
  WireServer server(loop, 0, "127.0.0.1");
  REQUIRE(server.port() != 0);
  loop.start();
  CommandClient client("127.0.0.1", server.port());

  SUBCASE("echo_seq follows the applied command") {
    client.send_raw(command(42, home));
    auto fb = await(client, [](const wire::Feedback& f) { return f.echo_seq == 42; }, 500ms);
    REQUIRE(fb.has_value());
    CHECK(fb->state == wire::WireState::Ready);
    CHECK(fb->actual == home);
  }

  SUBCASE("garbage datagrams are counted and ignored") {
    net::UdpSocket raw;
    raw.bind(0, "127.0.0.1");
    const std::vector<std::uint8_t> junk = {1, 2, 3};
    raw.send_to(junk, net::Endpoint::resolve("127.0.0.1", server.port()));
    client.send(home);
    REQUIRE(await(client, [](const wire::Feedback&) { return true; }, 500ms).has_value());
    CHECK(server.decode_errors() == 1);
  }

  SUBCASE("silence holds the pose in READY") {
    RobotPose far = home;
    far.position_mm.x() -= 100.0;
    client.send(far);
    std::this_thread::sleep_for(800ms);
    const Snapshot a = loop.snapshot();
    std::this_thread::sleep_for(200ms);
    const Snapshot b = loop.snapshot();
    CHECK(a.state.pose == b.state.pose);
    CHECK(b.state.mode == Mode::Ready);
    // Moved at the clamp speed until the hold fired, not further.
    const double moved = (home.position_mm - b.state.pose.position_mm).norm();
    CHECK(moved > 10.0);
    CHECK(moved < 50.0 * 0.5 + 1.0);
  }

  SUBCASE("no feedback after disconnect") {
    client.send(home);
    REQUIRE(await(client, [](const wire::Feedback&) { return true; }, 500ms).has_value());
    loop.disconnect();
    while (client.receive(10ms)) {
    }
    CHECK_FALSE(client.receive(100ms).has_value());
  }

  SUBCASE("feedback rate over one second") {
    client.send(home);
    REQUIRE(await(client, [](const wire::Feedback&) { return true; }, 500ms).has_value());
    while (client.receive(0ms)) {
    }
    int count = 0;
    const auto end = clock_type::now() + 1s;
    while (clock_type::now() < end) {
      auto left = std::chrono::duration_cast<std::chrono::milliseconds>(end - clock_type::now());
      if (client.receive(std::max(left, 1ms))) ++count;
    }
    CHECK(count >= 245);
    CHECK(count <= 255);
  }

  SUBCASE("250 commands per second for 10 seconds") {
    RobotPose target = home;
    const std::uint64_t applied_before = loop.applied_commands();
    auto next = clock_type::now();
    int sent = 0;
    for (int i = 0; i < 2500; ++i) {
      target.position_mm.x() = home.position_mm.x() - 5.0 * std::sin(i * 0.01);
      client.send(target);
      ++sent;
      next += 4ms;
      while (client.receive(0ms)) {
      }
      std::this_thread::sleep_until(next);
    }
    std::this_thread::sleep_for(50ms);
    const double ratio = static_cast<double>(loop.applied_commands() - applied_before) / sent;
    CHECK(ratio >= 0.99);
    CHECK(loop.snapshot().state.mode != Mode::Error);
  }

  server.stop();
  loop.stop();
}
