#pragma once

#include "cell/error.hpp"

#include <netinet/in.h>

#include <chrono>
#include <cstdint>
#include <optional>
#include <span>
#include <string>

namespace cell::net {

/// Thrown when a listening port cannot be bound; carries the port for the CLI.
class BindError : public Error {
public:
  BindError(std::uint16_t port, const std::string& what) : Error(what), port_(port) {}
  std::uint16_t port() const { return port_; }

private:
  std::uint16_t port_;
};

struct Endpoint {
  sockaddr_in addr{};

  static Endpoint resolve(const std::string& host, std::uint16_t port);
  std::string str() const;
  bool operator==(const Endpoint& o) const;
};

struct Received {
  std::size_t size;
  Endpoint from;
};

/// RAII IPv4 datagram socket.
class UdpSocket {
public:
  UdpSocket();
  ~UdpSocket();
  UdpSocket(UdpSocket&& other) noexcept;
  UdpSocket& operator=(UdpSocket&& other) noexcept;
  UdpSocket(const UdpSocket&) = delete;
  UdpSocket& operator=(const UdpSocket&) = delete;

  /// Port 0 picks an ephemeral port. Throws BindError.
  void bind(std::uint16_t port, const std::string& host = "0.0.0.0");
  std::uint16_t local_port() const;

  /// Throws Error on a send failure.
  void send_to(std::span<const std::uint8_t> bytes, const Endpoint& to);
  /// Waits up to `timeout` for one datagram.
  std::optional<Received> receive(std::span<std::uint8_t> buffer, std::chrono::milliseconds timeout);

private:
  int fd_ = -1;
};

}  // namespace cell::net
