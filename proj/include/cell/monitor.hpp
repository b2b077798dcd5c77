#pragma once

#include "cell/control_loop.hpp"
#include "cell/error_codes.hpp"

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

namespace cell::monitor {

inline constexpr std::uint16_t kDefaultHttpPort = 8080;
inline constexpr const char* kCtrlState = "panel/ctrl-state";
inline constexpr const char* kElog5 = "elog/5";
inline constexpr const char* kElog9 = "elog/9";

struct ErrorEvent {
  ErrorCode code = ErrorCode::Unknown;
  std::string title;
  std::string description;
  int domain = 5;
  std::uint64_t seqnum = 0;
  std::uint64_t timestamp_us = 0;  // wall clock, microseconds since epoch
};

/// Append-only controller event log with an independent seqnum counter per
/// domain.
class ErrorLog {
public:
  ErrorEvent append(ErrorCode code, const std::string& detail = {});
  std::optional<ErrorEvent> find(int domain, std::uint64_t seqnum) const;
  std::vector<ErrorEvent> entries(int domain) const;

private:
  mutable std::mutex mu_;
  std::map<int, std::uint64_t> next_seq_;
  std::map<std::pair<int, std::uint64_t>, ErrorEvent> events_;
};

/// "init" | "motoron" | "motoroff" | "emergencystop".
std::string ctrl_state_name(const control::ControllerState& s);

/// Bounded event queue feeding one push connection.
class Channel {
public:
  explicit Channel(std::size_t capacity) : capacity_(capacity) {}

  /// False when the consumer is too slow and the channel got closed instead.
  bool push(std::string msg);
  std::optional<std::string> pop(std::chrono::milliseconds timeout);
  void close();
  bool closed() const;

private:
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::deque<std::string> q_;
  std::size_t capacity_;
  bool closed_ = false;
};

struct Subscription {
  std::string id;
  std::set<std::string> resources;
  std::chrono::system_clock::time_point created_at;
  std::shared_ptr<Channel> channel;
};

class SubscriptionHub {
public:
  explicit SubscriptionHub(std::size_t queue_capacity = 256) : capacity_(queue_capacity) {}

  static bool known_resource(const std::string& r);

  /// Throws std::invalid_argument on an empty or unknown resource list.
  Subscription create(const std::set<std::string>& resources);
  std::vector<Subscription> list() const;
  std::optional<Subscription> get(const std::string& id) const;
  bool remove(const std::string& id);
  /// Fans `msg` out to every live subscription that includes `resource`.
  /// Subscriptions whose queue overflows are dropped.
  void publish(const std::string& resource, const std::string& msg);
  std::size_t size() const;

private:
  std::string new_id();

  mutable std::mutex mu_;
  std::map<std::string, Subscription> subs_;
  std::size_t capacity_;
  std::uint64_t counter_ = 0;
};

/// Latest-frame slot for the point-cloud stream.
class FrameBroadcaster {
public:
  using Frame = std::shared_ptr<const std::vector<std::uint8_t>>;

  void publish(std::vector<std::uint8_t> bytes);
  /// Waits for a frame newer than `after`; returns (frame id, bytes).
  std::optional<std::pair<std::uint64_t, Frame>> wait_newer(std::uint64_t after, std::chrono::milliseconds timeout);
  void close();

private:
  std::mutex mu_;
  std::condition_variable cv_;
  std::uint64_t id_ = 0;
  Frame frame_;
  bool closed_ = false;
};

struct MonitorConfig {
  std::uint16_t port = kDefaultHttpPort;
  std::string host = "0.0.0.0";
  std::size_t queue_capacity = 256;
};

/// HTTP + WebSocket monitoring service in front of a running ControlLoop.
class MonitorService {
public:
  MonitorService(control::ControlLoop& loop, MonitorConfig cfg, FrameBroadcaster* frames = nullptr);
  ~MonitorService();
  MonitorService(const MonitorService&) = delete;
  MonitorService& operator=(const MonitorService&) = delete;

  /// Binds and starts accepting. Throws net::BindError.
  void start();
  void stop();
  std::uint16_t port() const;

  ErrorLog& log() { return log_; }
  SubscriptionHub& hub() { return hub_; }

  struct Impl;

private:
  void on_event(const control::ControllerEvent& e, const control::ControllerState& s);

  control::ControlLoop& loop_;
  MonitorConfig cfg_;
  FrameBroadcaster* frames_;
  ErrorLog log_;
  SubscriptionHub hub_;
  std::mutex state_mu_;
  std::string last_ctrl_state_;
  std::unique_ptr<Impl> impl_;
};

}  // namespace cell::monitor
