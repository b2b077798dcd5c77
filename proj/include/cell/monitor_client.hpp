#pragma once

#include <chrono>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace cell::monitor {

struct HttpResponse {
  int status = 0;
  std::string body;
};

/// Blocking client for the monitoring service. One connection per request.
class MonitorClient {
public:
  MonitorClient(std::string host, std::uint16_t port);

  /// Throws Error when the service cannot be reached.
  HttpResponse request(const std::string& method, const std::string& target, const std::string& body = {}) const;
  HttpResponse get(const std::string& target) const { return request("GET", target); }
  HttpResponse post(const std::string& target, const std::string& body = {}) const { return request("POST", target, body); }
  HttpResponse del(const std::string& target) const { return request("DELETE", target); }

  const std::string& host() const { return host_; }
  std::uint16_t port() const { return port_; }

private:
  std::string host_;
  std::uint16_t port_;
};

/// WebSocket push connection (events or point-cloud frames). A background
/// reader queues incoming messages.
class PushChannel {
public:
  static std::unique_ptr<PushChannel> open(const std::string& host, std::uint16_t port, const std::string& target);
  ~PushChannel();

  std::optional<std::string> next(std::chrono::milliseconds timeout);
  bool closed() const;

  struct Impl;
  explicit PushChannel(std::unique_ptr<Impl> impl);

private:
  std::unique_ptr<Impl> impl_;
};

/// Lists live subscriptions, pulls their ids out of the listing by pattern,
/// and deletes each one. Returns the number removed; ids that vanished in the
/// meantime (404) count as removed.
std::size_t cleanup_subscriptions(const MonitorClient& client);

/// POST /subscription, then open the push channel for the new id.
struct Subscribed {
  std::string id;
  std::unique_ptr<PushChannel> channel;
};
Subscribed subscribe(const MonitorClient& client, const std::vector<std::string>& resources);

}  // namespace cell::monitor
