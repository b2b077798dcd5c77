#pragma once

#include "cell/controller.hpp"
#include "cell/udp.hpp"
#include "cell/wire.hpp"

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <future>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace cell::control {

struct LoopConfig {
  double rate_hz = 250.0;
  std::size_t inbox_capacity = 64;
};

/// Immutable copy of the controller state taken at the end of a cycle.
struct Snapshot {
  ControllerState state;
  RobotPose target;
  std::uint64_t cycle = 0;
};

/// Drives a Controller at a fixed rate on its own thread. The loop thread is
/// the only owner of the controller; everything else talks to it through
/// queues and receives copies.
class ControlLoop {
public:
  using FeedbackSink = std::function<void(const wire::Feedback&)>;
  using EventListener = std::function<void(const ControllerEvent&, const ControllerState&)>;

  ControlLoop(Controller controller, LoopConfig cfg = {});
  ~ControlLoop();
  ControlLoop(const ControlLoop&) = delete;
  ControlLoop& operator=(const ControlLoop&) = delete;

  void start();
  void stop();
  bool running() const { return running_; }

  /// Queues a decoded command. The inbox is bounded; when full the oldest
  /// entry is dropped so the receive path never stalls the loop.
  void submit(const wire::Command& cmd, const std::string& source);

  /// Runs on the loop thread, only while the controller is connected.
  void set_feedback_sink(FeedbackSink sink);
  /// Runs on the loop thread for every controller event; must not block.
  void add_event_listener(EventListener listener);

  // Service requests, executed at the start of the next cycle.
  Mode connect();
  Mode disconnect();
  Mode restart();
  GripperAck gripper(wire::GripperAction action);
  void inject_fault(ErrorCode code);

  Snapshot snapshot() const;
  std::uint64_t feedback_count() const { return feedback_count_; }
  std::uint64_t dropped_commands() const { return dropped_; }
  /// Commands that reached the controller (not stale, not ignored while disconnected).
  std::uint64_t applied_commands() const { return applied_; }
  std::uint64_t stale_commands() const { return stale_; }

private:
  template <typename F>
  auto request(F&& fn) -> decltype(fn(std::declval<Controller&>()));

  void run();
  void tick();
  void apply_commands();
  void publish_events();

  Controller controller_;
  LoopConfig cfg_;
  std::thread thread_;
  std::atomic<bool> running_{false};
  std::atomic<bool> stop_{false};

  struct Inbound {
    wire::Command cmd;
    std::string source;
  };
  std::mutex inbox_mu_;
  std::deque<Inbound> inbox_;
  std::deque<std::function<void(Controller&)>> requests_;
  std::atomic<std::uint64_t> dropped_{0};
  std::atomic<std::uint64_t> applied_{0};
  std::atomic<std::uint64_t> stale_{0};

  std::mutex hooks_mu_;
  FeedbackSink sink_;
  std::vector<EventListener> listeners_;

  mutable std::mutex snap_mu_;
  Snapshot snap_;

  // Loop-thread only.
  std::map<std::string, std::uint32_t> last_seq_;
  bool auto_connect_ = true;
  std::uint32_t feedback_seq_ = 0;
  std::atomic<std::uint64_t> feedback_count_{0};
  std::uint64_t cycle_ = 0;
};

/// UDP endpoint of the controller: decodes inbound COMMAND datagrams into the
/// loop and sends FEEDBACK to the most recent command sender.
class WireServer {
public:
  WireServer(ControlLoop& loop, std::uint16_t port, const std::string& host = "0.0.0.0");
  ~WireServer();

  std::uint16_t port() const { return port_; }
  std::uint64_t decode_errors() const { return decode_errors_; }
  void stop();

private:
  void receive_loop();

  ControlLoop& loop_;
  net::UdpSocket socket_;
  std::uint16_t port_ = 0;
  std::atomic<bool> stop_{false};
  std::thread rx_;
  std::mutex peer_mu_;
  std::optional<net::Endpoint> peer_;
  std::atomic<std::uint64_t> decode_errors_{0};
};

/// Client side of the stream: numbered COMMAND datagrams out, FEEDBACK in.
class CommandClient {
public:
  CommandClient(const std::string& host, std::uint16_t port);

  /// Sends one command and returns its sequence number.
  std::uint32_t send(const RobotPose& target, wire::GripperAction gripper = wire::GripperAction::Hold);
  /// Sends a pre-built command unchanged (seq and timestamp included).
  void send_raw(const wire::Command& cmd);
  std::optional<wire::Feedback> receive(std::chrono::milliseconds timeout);
  std::uint32_t last_seq() const { return seq_; }

private:
  net::UdpSocket socket_;
  net::Endpoint server_;
  std::uint32_t seq_ = 0;
};

}  // namespace cell::control
