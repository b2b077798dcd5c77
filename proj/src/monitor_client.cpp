#include "cell/monitor_client.hpp"

#include "cell/error.hpp"
#include "json.hpp"

#include <boost/asio/connect.hpp>
#include <boost/asio/ip/tcp.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include <condition_variable>
#include <deque>
#include <mutex>
#include <regex>
#include <set>
#include <thread>

namespace cell::monitor {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;

namespace {

tcp::socket connect_to(asio::io_context& ioc, const std::string& host, std::uint16_t port) {
  tcp::resolver resolver(ioc);
  beast::error_code ec;
  const auto results = resolver.resolve(host, std::to_string(port), ec);
  if (ec) throw Error("cannot resolve " + host + ": " + ec.message());
  tcp::socket sock(ioc);
  asio::connect(sock, results, ec);
  if (ec) throw Error("cannot reach monitor at " + host + ":" + std::to_string(port) + ": " + ec.message());
  sock.set_option(tcp::no_delay(true), ec);
  return sock;
}

}  // namespace

MonitorClient::MonitorClient(std::string host, std::uint16_t port) : host_(std::move(host)), port_(port) {}

HttpResponse MonitorClient::request(const std::string& method, const std::string& target, const std::string& body) const {
  asio::io_context ioc;
  tcp::socket sock = connect_to(ioc, host_, port_);
  http::request<http::string_body> req{http::string_to_verb(method), target, 11};
  req.set(http::field::host, host_);
  req.set(http::field::content_type, "application/json");
  req.keep_alive(false);
  req.body() = body;
  req.prepare_payload();

  beast::error_code ec;
  http::write(sock, req, ec);
  if (ec) throw Error("monitor request failed: " + ec.message());
  beast::flat_buffer buf;
  http::response<http::string_body> res;
  http::read(sock, buf, res, ec);
  if (ec) throw Error("monitor response failed: " + ec.message());
  sock.shutdown(tcp::socket::shutdown_both, ec);
  return {static_cast<int>(res.result_int()), res.body()};
}

struct PushChannel::Impl {
  asio::io_context ioc;
  websocket::stream<tcp::socket> ws;
  std::thread reader;
  std::mutex mu;
  std::condition_variable cv;
  std::deque<std::string> q;
  bool closed = false;

  Impl(const std::string& host, std::uint16_t port) : ws(connect_to(ioc, host, port)) {}

  void read_loop() {
    beast::flat_buffer buf;
    for (;;) {
      beast::error_code ec;
      ws.read(buf, ec);
      if (ec) break;
      std::string msg = beast::buffers_to_string(buf.data());
      buf.consume(buf.size());
      {
        std::lock_guard lk(mu);
        q.push_back(std::move(msg));
      }
      cv.notify_one();
    }
    {
      std::lock_guard lk(mu);
      closed = true;
    }
    cv.notify_all();
  }
};

PushChannel::PushChannel(std::unique_ptr<Impl> impl) : impl_(std::move(impl)) {
  impl_->reader = std::thread([this] { impl_->read_loop(); });
}

PushChannel::~PushChannel() {
  beast::error_code ec;
  // Unblocks the reader; a close handshake would race its pending read.
  impl_->ws.next_layer().shutdown(tcp::socket::shutdown_both, ec);
  if (impl_->reader.joinable()) impl_->reader.join();
}

std::unique_ptr<PushChannel> PushChannel::open(const std::string& host, std::uint16_t port, const std::string& target) {
  auto impl = std::make_unique<Impl>(host, port);
  beast::error_code ec;
  impl->ws.handshake(host + ":" + std::to_string(port), target, ec);
  if (ec) throw Error("WebSocket upgrade at " + target + " failed: " + ec.message());
  return std::make_unique<PushChannel>(std::move(impl));
}

std::optional<std::string> PushChannel::next(std::chrono::milliseconds timeout) {
  std::unique_lock lk(impl_->mu);
  impl_->cv.wait_for(lk, timeout, [&] { return !impl_->q.empty() || impl_->closed; });
  if (impl_->q.empty()) return std::nullopt;
  std::string m = std::move(impl_->q.front());
  impl_->q.pop_front();
  return m;
}

bool PushChannel::closed() const {
  std::lock_guard lk(impl_->mu);
  return impl_->closed && impl_->q.empty();
}

std::size_t cleanup_subscriptions(const MonitorClient& client) {
  const auto listing = client.get("/subscription");
  if (listing.status != 200) throw Error("subscription listing failed with HTTP " + std::to_string(listing.status));
  static const std::regex id_pattern(R"(/subscription/([0-9A-Za-z]+))");
  std::set<std::string> ids;
  for (auto it = std::sregex_iterator(listing.body.begin(), listing.body.end(), id_pattern); it != std::sregex_iterator();
       ++it) {
    ids.insert((*it)[1].str());
  }
  std::size_t removed = 0;
  for (const auto& id : ids) {
    const auto res = client.del("/subscription/" + id);
    if (res.status == 200 || res.status == 404) ++removed;
  }
  return removed;
}

Subscribed subscribe(const MonitorClient& client, const std::vector<std::string>& resources) {
  const auto res = client.post("/subscription", nlohmann::json{{"resources", resources}}.dump());
  if (res.status != 201) throw Error("subscription rejected with HTTP " + std::to_string(res.status) + ": " + res.body);
  const auto body = nlohmann::json::parse(res.body);
  Subscribed s;
  s.id = body.at("id").get<std::string>();
  s.channel = PushChannel::open(client.host(), client.port(), body.at("poll").get<std::string>());
  return s;
}

}  // namespace cell::monitor
