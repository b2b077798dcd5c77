#include "cell/monitor.hpp"

#include "cell/pointcloud.hpp"
#include "cell/udp.hpp"
#include "json.hpp"

#include <boost/asio/ip/tcp.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include <poll.h>
#include <sys/socket.h>

#include <atomic>
#include <list>
#include <random>
#include <sstream>
#include <stdexcept>

namespace cell::monitor {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;
using json = nlohmann::json;

// ---------------------------------------------------------------- ErrorLog

ErrorEvent ErrorLog::append(ErrorCode code, const std::string& detail) {
  ErrorEvent e;
  e.code = code;
  e.title = std::string(title(code));
  e.description = std::string(description(code));
  if (!detail.empty()) e.description += " Detail: " + detail + ".";
  e.domain = domain_of(code);
  e.timestamp_us = static_cast<std::uint64_t>(
      std::chrono::duration_cast<std::chrono::microseconds>(std::chrono::system_clock::now().time_since_epoch()).count());
  std::lock_guard lk(mu_);
  auto& next = next_seq_[e.domain];
  e.seqnum = ++next;
  events_.emplace(std::make_pair(e.domain, e.seqnum), e);
  return e;
}

std::optional<ErrorEvent> ErrorLog::find(int domain, std::uint64_t seqnum) const {
  std::lock_guard lk(mu_);
  auto it = events_.find({domain, seqnum});
  if (it == events_.end()) return std::nullopt;
  return it->second;
}

std::vector<ErrorEvent> ErrorLog::entries(int domain) const {
  std::lock_guard lk(mu_);
  std::vector<ErrorEvent> out;
  for (const auto& [key, e] : events_) {
    if (key.first == domain) out.push_back(e);
  }
  return out;
}

std::string ctrl_state_name(const control::ControllerState& s) {
  using control::Mode;
  switch (s.mode) {
    case Mode::Disconnected: return "init";
    case Mode::Ready:
    case Mode::Executing: return "motoron";
    case Mode::Error:
      return s.active_error && s.active_error->code == ErrorCode::EmergencyStop ? "emergencystop" : "motoroff";
  }
  return "init";
}

// ---------------------------------------------------------------- Channel

bool Channel::push(std::string msg) {
  {
    std::lock_guard lk(mu_);
    if (closed_) return false;
    if (q_.size() >= capacity_) {
      closed_ = true;
      q_.clear();
      cv_.notify_all();
      return false;
    }
    q_.push_back(std::move(msg));
  }
  cv_.notify_one();
  return true;
}

std::optional<std::string> Channel::pop(std::chrono::milliseconds timeout) {
  std::unique_lock lk(mu_);
  cv_.wait_for(lk, timeout, [&] { return !q_.empty() || closed_; });
  if (q_.empty()) return std::nullopt;
  std::string m = std::move(q_.front());
  q_.pop_front();
  return m;
}

void Channel::close() {
  {
    std::lock_guard lk(mu_);
    closed_ = true;
  }
  cv_.notify_all();
}

bool Channel::closed() const {
  std::lock_guard lk(mu_);
  return closed_;
}

// ---------------------------------------------------------------- SubscriptionHub

bool SubscriptionHub::known_resource(const std::string& r) { return r == kCtrlState || r == kElog5 || r == kElog9; }

std::string SubscriptionHub::new_id() {
  static thread_local std::mt19937_64 rng{std::random_device{}()};
  std::ostringstream os;
  os << std::hex << rng() << ++counter_;
  return os.str();
}

Subscription SubscriptionHub::create(const std::set<std::string>& resources) {
  if (resources.empty()) throw std::invalid_argument("no resources requested");
  for (const auto& r : resources) {
    if (!known_resource(r)) throw std::invalid_argument("unknown resource '" + r + "'");
  }
  std::lock_guard lk(mu_);
  Subscription s;
  s.id = new_id();
  s.resources = resources;
  s.created_at = std::chrono::system_clock::now();
  s.channel = std::make_shared<Channel>(capacity_);
  subs_.emplace(s.id, s);
  return s;
}

std::vector<Subscription> SubscriptionHub::list() const {
  std::lock_guard lk(mu_);
  std::vector<Subscription> out;
  for (const auto& [id, s] : subs_) out.push_back(s);
  return out;
}

std::optional<Subscription> SubscriptionHub::get(const std::string& id) const {
  std::lock_guard lk(mu_);
  auto it = subs_.find(id);
  if (it == subs_.end()) return std::nullopt;
  return it->second;
}

bool SubscriptionHub::remove(const std::string& id) {
  std::shared_ptr<Channel> ch;
  {
    std::lock_guard lk(mu_);
    auto it = subs_.find(id);
    if (it == subs_.end()) return false;
    ch = it->second.channel;
    subs_.erase(it);
  }
  ch->close();
  return true;
}

void SubscriptionHub::publish(const std::string& resource, const std::string& msg) {
  std::lock_guard lk(mu_);
  for (auto it = subs_.begin(); it != subs_.end();) {
    if (it->second.resources.count(resource) && !it->second.channel->push(msg)) {
      it = subs_.erase(it);  // slow consumer: its channel is already closed
    } else {
      ++it;
    }
  }
}

std::size_t SubscriptionHub::size() const {
  std::lock_guard lk(mu_);
  return subs_.size();
}

// ---------------------------------------------------------------- FrameBroadcaster

void FrameBroadcaster::publish(std::vector<std::uint8_t> bytes) {
  {
    std::lock_guard lk(mu_);
    frame_ = std::make_shared<const std::vector<std::uint8_t>>(std::move(bytes));
    ++id_;
  }
  cv_.notify_all();
}

std::optional<std::pair<std::uint64_t, FrameBroadcaster::Frame>> FrameBroadcaster::wait_newer(
    std::uint64_t after, std::chrono::milliseconds timeout) {
  std::unique_lock lk(mu_);
  cv_.wait_for(lk, timeout, [&] { return id_ > after || closed_; });
  if (id_ <= after || !frame_) return std::nullopt;
  return std::make_pair(id_, frame_);
}

void FrameBroadcaster::close() {
  {
    std::lock_guard lk(mu_);
    closed_ = true;
  }
  cv_.notify_all();
}

// ---------------------------------------------------------------- service

namespace {

using Request = http::request<http::string_body>;
using Response = http::response<http::string_body>;

Response reply(const Request& req, http::status status, const json& body) {
  Response res{status, req.version()};
  res.set(http::field::server, "cell-monitor");
  res.set(http::field::content_type, "application/json");
  res.set(http::field::access_control_allow_origin, "*");
  res.keep_alive(req.keep_alive());
  res.body() = body.dump();
  res.prepare_payload();
  return res;
}

Response error_reply(const Request& req, http::status status, const std::string& msg) {
  return reply(req, status, json{{"error", msg}});
}

std::vector<std::string> split_path(std::string_view target) {
  if (auto q = target.find('?'); q != std::string_view::npos) target = target.substr(0, q);
  std::vector<std::string> parts;
  std::size_t i = 0;
  while (i < target.size()) {
    while (i < target.size() && target[i] == '/') ++i;
    const std::size_t j = target.find('/', i);
    const std::size_t end = j == std::string_view::npos ? target.size() : j;
    if (end > i) parts.emplace_back(target.substr(i, end - i));
    i = end;
  }
  return parts;
}

std::optional<std::uint64_t> parse_uint(const std::string& s) {
  if (s.empty() || s.size() > 18) return std::nullopt;
  std::uint64_t v = 0;
  for (char c : s) {
    if (c < '0' || c > '9') return std::nullopt;
    v = v * 10 + static_cast<std::uint64_t>(c - '0');
  }
  return v;
}

json pose_json(const RobotPose& p) {
  return json{{"position_mm", {p.position_mm.x(), p.position_mm.y(), p.position_mm.z()}},
              {"quaternion", {p.orientation.w(), p.orientation.x(), p.orientation.y(), p.orientation.z()}}};
}

json event_json(const ErrorEvent& e) {
  return json{{"code", static_cast<int>(e.code)}, {"title", e.title},       {"description", e.description},
              {"domain", e.domain},              {"seqnum", e.seqnum},     {"timestamp_us", e.timestamp_us}};
}

json state_json(const control::Snapshot& snap) {
  const auto& s = snap.state;
  json j{{"state", ctrl_state_name(s)},
         {"mode", control::to_string(s.mode)},
         {"gripper", control::to_string(s.gripper)},
         {"joints_deg", s.q},
         {"actual", pose_json(s.pose)},
         {"target", pose_json(snap.target)},
         {"cycle", snap.cycle}};
  if (s.active_error) {
    j["active_error"] = {{"code", static_cast<int>(s.active_error->code)},
                         {"title", std::string(title(s.active_error->code))}};
  } else {
    j["active_error"] = nullptr;
  }
  return j;
}

}  // namespace

struct MonitorService::Impl {
  MonitorService& owner;
  asio::io_context ioc;
  std::optional<tcp::acceptor> acceptor;
  std::thread accept_thread;
  std::atomic<bool> stopping{false};
  std::uint16_t port = 0;

  struct Session {
    std::thread thread;
    std::shared_ptr<std::atomic<bool>> done;
    int fd;
  };
  std::mutex sessions_mu;
  std::list<Session> sessions;
  std::atomic<std::uint32_t> relay_seq{0};

  explicit Impl(MonitorService& o) : owner(o) {}

  void accept_loop();
  void reap(bool all);
  void serve(tcp::socket sock);
  Response route(const Request& req);
  void push_events(tcp::socket sock, const Request& req, const std::string& id);
  void push_frames(tcp::socket sock, const Request& req);

  Response handle_subscription_post(const Request& req);
  Response handle_gripper(const Request& req);
  Response handle_relay(const Request& req);
};

MonitorService::MonitorService(control::ControlLoop& loop, MonitorConfig cfg, FrameBroadcaster* frames)
    : loop_(loop), cfg_(std::move(cfg)), frames_(frames), hub_(cfg_.queue_capacity), impl_(std::make_unique<Impl>(*this)) {
  last_ctrl_state_ = ctrl_state_name(loop_.snapshot().state);
  loop_.add_event_listener([this](const control::ControllerEvent& e, const control::ControllerState& s) { on_event(e, s); });
}

MonitorService::~MonitorService() { stop(); }

void MonitorService::on_event(const control::ControllerEvent& e, const control::ControllerState& s) {
  if (const auto* err = std::get_if<control::ErrorRaised>(&e)) {
    const ErrorEvent ev = log_.append(err->code, err->detail);
    const std::string resource = ev.domain == 9 ? kElog9 : kElog5;
    hub_.publish(resource, json{{"resource", resource}, {"seqnum", ev.seqnum}}.dump());
  }
  const std::string name = ctrl_state_name(s);
  std::lock_guard lk(state_mu_);
  if (name != last_ctrl_state_) {
    last_ctrl_state_ = name;
    hub_.publish(kCtrlState, json{{"resource", kCtrlState}, {"state", name}}.dump());
  }
}

void MonitorService::start() {
  auto& im = *impl_;
  if (im.acceptor) return;
  beast::error_code ec;
  tcp::endpoint ep{asio::ip::make_address(cfg_.host == "localhost" ? "127.0.0.1" : cfg_.host, ec), cfg_.port};
  if (ec) throw Error("bad HTTP host '" + cfg_.host + "'");
  tcp::acceptor acc(im.ioc);
  acc.open(ep.protocol(), ec);
  if (!ec) acc.set_option(asio::socket_base::reuse_address(true), ec);
  if (!ec) acc.bind(ep, ec);
  if (!ec) acc.listen(asio::socket_base::max_listen_connections, ec);
  if (ec) throw net::BindError(cfg_.port, "cannot bind HTTP port " + std::to_string(cfg_.port) + ": " + ec.message());
  im.port = acc.local_endpoint().port();
  im.acceptor.emplace(std::move(acc));
  im.stopping = false;
  im.accept_thread = std::thread([&im] { im.accept_loop(); });
}

void MonitorService::stop() {
  if (!impl_) return;
  auto& im = *impl_;
  if (!im.acceptor) return;
  im.stopping = true;
  if (im.accept_thread.joinable()) im.accept_thread.join();
  for (const auto& s : hub_.list()) s.channel->close();
  if (frames_) frames_->close();
  {
    std::lock_guard lk(im.sessions_mu);
    for (auto& s : im.sessions) ::shutdown(s.fd, SHUT_RDWR);
  }
  im.reap(true);
  beast::error_code ec;
  im.acceptor->close(ec);
  im.acceptor.reset();
}

std::uint16_t MonitorService::port() const { return impl_->port; }

void MonitorService::Impl::reap(bool all) {
  std::list<Session> finished;
  {
    std::lock_guard lk(sessions_mu);
    for (auto it = sessions.begin(); it != sessions.end();) {
      if (all || *it->done) {
        finished.splice(finished.end(), sessions, it++);
      } else {
        ++it;
      }
    }
  }
  for (auto& s : finished) {
    if (s.thread.joinable()) s.thread.join();
  }
}

void MonitorService::Impl::accept_loop() {
  while (!stopping) {
    pollfd pfd{acceptor->native_handle(), POLLIN, 0};
    if (::poll(&pfd, 1, 100) <= 0) {
      reap(false);
      continue;
    }
    beast::error_code ec;
    tcp::socket sock(ioc);
    acceptor->accept(sock, ec);
    if (ec) continue;
    sock.set_option(tcp::no_delay(true), ec);
    auto done = std::make_shared<std::atomic<bool>>(false);
    const int fd = sock.native_handle();
    std::lock_guard lk(sessions_mu);
    sessions.push_back(Session{std::thread([this, done, s = std::move(sock)]() mutable {
                                 serve(std::move(s));
                                 *done = true;
                               }),
                               done, fd});
  }
}

void MonitorService::Impl::serve(tcp::socket sock) {
  beast::flat_buffer buf;
  beast::error_code ec;
  while (!stopping) {
    Request req;
    http::read(sock, buf, req, ec);
    if (ec) break;
    if (websocket::is_upgrade(req)) {
      const auto parts = split_path(std::string_view(req.target().data(), req.target().size()));
      if (parts.size() == 2 && parts[0] == "poll") {
        push_events(std::move(sock), req, parts[1]);
        return;
      }
      if (parts.size() == 2 && parts[0] == "stream" && parts[1] == "pointcloud") {
        push_frames(std::move(sock), req);
        return;
      }
      http::write(sock, error_reply(req, http::status::not_found, "no push channel at this path"), ec);
      break;
    }
    Response res;
    try {
      res = route(req);
    } catch (const std::exception& e) {
      res = error_reply(req, http::status::internal_server_error, e.what());
    }
    http::write(sock, res, ec);
    if (ec || !res.keep_alive()) break;
  }
  sock.shutdown(tcp::socket::shutdown_both, ec);
}

Response MonitorService::Impl::route(const Request& req) {
  const auto parts = split_path(std::string_view(req.target().data(), req.target().size()));
  const auto method = req.method();
  auto& loop = owner.loop_;

  if (parts.size() == 3 && parts[0] == "rw" && parts[1] == "panel" && parts[2] == "ctrl-state" && method == http::verb::get) {
    return reply(req, http::status::ok, json{{"state", ctrl_state_name(loop.snapshot().state)}});
  }
  if (parts.size() == 2 && parts[0] == "rw" && parts[1] == "status" && method == http::verb::get) {
    return reply(req, http::status::ok, state_json(loop.snapshot()));
  }
  if (parts.size() == 4 && parts[0] == "rw" && parts[1] == "elog" && method == http::verb::get) {
    const auto domain = parse_uint(parts[2]);
    const auto seq = parse_uint(parts[3]);
    if (!domain || !seq) return error_reply(req, http::status::bad_request, "domain and seqnum must be integers");
    const auto ev = owner.log_.find(static_cast<int>(*domain), *seq);
    if (!ev) return error_reply(req, http::status::not_found, "no such seqnum");
    return reply(req, http::status::ok, event_json(*ev));
  }
  if (parts.size() == 1 && parts[0] == "subscription") {
    if (method == http::verb::post) return handle_subscription_post(req);
    if (method == http::verb::get) {
      json list = json::array();
      for (const auto& s : owner.hub_.list()) {
        list.push_back({{"id", s.id}, {"resources", s.resources}, {"href", "/subscription/" + s.id}});
      }
      return reply(req, http::status::ok, json{{"subscriptions", list}});
    }
  }
  if (parts.size() == 2 && parts[0] == "subscription" && method == http::verb::delete_) {
    if (!owner.hub_.remove(parts[1])) return error_reply(req, http::status::not_found, "no such subscription");
    return reply(req, http::status::ok, json{{"deleted", parts[1]}});
  }
  if (parts.size() == 2 && parts[0] == "fault" && method == http::verb::post) {
    const auto code = parse_uint(parts[1]);
    const auto known = code ? known_code(static_cast<int>(*code)) : std::nullopt;
    if (!known) return error_reply(req, http::status::bad_request, "unknown fault code");
    loop.inject_fault(*known);
    return reply(req, http::status::accepted, json{{"code", static_cast<int>(*known)}, {"domain", domain_of(*known)}});
  }
  if (parts.size() == 1 && parts[0] == "gripper" && method == http::verb::post) return handle_gripper(req);
  if (parts.size() == 1 && method == http::verb::post) {
    control::Mode m;
    if (parts[0] == "connect") {
      m = loop.connect();
    } else if (parts[0] == "disconnect") {
      m = loop.disconnect();
    } else if (parts[0] == "restart") {
      m = loop.restart();
    } else {
      return error_reply(req, http::status::not_found, "no such resource");
    }
    json body = state_json(loop.snapshot());
    body["mode"] = control::to_string(m);
    return reply(req, http::status::ok, body);
  }
  if (parts.size() == 2 && parts[0] == "relay" && parts[1] == "pose" && method == http::verb::post) return handle_relay(req);
  if (parts.size() == 2 && parts[0] == "poll") {
    return error_reply(req, http::status::upgrade_required, "push channel needs a WebSocket upgrade");
  }
  return error_reply(req, http::status::not_found, "no such resource");
}

Response MonitorService::Impl::handle_subscription_post(const Request& req) {
  std::set<std::string> resources;
  try {
    const json body = json::parse(req.body());
    for (const auto& r : body.at("resources")) resources.insert(r.get<std::string>());
  } catch (const std::exception&) {
    return error_reply(req, http::status::bad_request, "body must be {\"resources\": [..]}");
  }
  try {
    const auto sub = owner.hub_.create(resources);
    return reply(req, http::status::created, json{{"id", sub.id}, {"poll", "/poll/" + sub.id}});
  } catch (const std::invalid_argument& e) {
    return error_reply(req, http::status::bad_request, e.what());
  }
}

Response MonitorService::Impl::handle_gripper(const Request& req) {
  std::string action;
  try {
    action = json::parse(req.body()).at("action").get<std::string>();
  } catch (const std::exception&) {
    return error_reply(req, http::status::bad_request, "body must be {\"action\": \"open\"|\"close\"}");
  }
  wire::GripperAction a;
  if (action == "open") {
    a = wire::GripperAction::Open;
  } else if (action == "close") {
    a = wire::GripperAction::Close;
  } else {
    return error_reply(req, http::status::bad_request, "action must be open or close");
  }
  switch (owner.loop_.gripper(a)) {
    case control::GripperAck::RejectedError:
      return error_reply(req, http::status::conflict, "controller has an active error");
    case control::GripperAck::RejectedDisconnected:
      return error_reply(req, http::status::conflict, "controller is not connected");
    case control::GripperAck::Applied:
    case control::GripperAck::Unchanged: break;
  }
  return reply(req, http::status::ok, json{{"gripper", control::to_string(owner.loop_.snapshot().state.gripper)}});
}

Response MonitorService::Impl::handle_relay(const Request& req) {
  wire::Command cmd;
  try {
    const json body = json::parse(req.body());
    const auto p = body.at("position_mm").get<std::vector<double>>();
    const auto q = body.at("quaternion").get<std::vector<double>>();
    if (p.size() != 3 || q.size() != 4) throw std::invalid_argument("shape");
    cmd.target.position_mm = Eigen::Vector3d(p[0], p[1], p[2]);
    cmd.target.orientation = Eigen::Quaterniond(q[0], q[1], q[2], q[3]);
    const std::string g = body.value("gripper", "hold");
    if (g == "open") {
      cmd.gripper = wire::GripperAction::Open;
    } else if (g == "close") {
      cmd.gripper = wire::GripperAction::Close;
    } else if (g != "hold") {
      throw std::invalid_argument("gripper");
    }
  } catch (const std::exception&) {
    return error_reply(req, http::status::bad_request,
                       "body must be {\"position_mm\":[x,y,z],\"quaternion\":[w,x,y,z],\"gripper\":\"hold\"|\"open\"|\"close\"}");
  }
  if (!cmd.target.finite() || std::abs(cmd.target.orientation.norm() - 1.0) > 1e-6) {
    return error_reply(req, http::status::bad_request, "pose must be finite with a unit quaternion");
  }
  const auto mode = owner.loop_.snapshot().state.mode;
  if (mode == control::Mode::Disconnected || mode == control::Mode::Error) {
    return error_reply(req, http::status::conflict, "controller not accepting motion in mode " + control::to_string(mode));
  }
  cmd.seq = ++relay_seq;
  cmd.timestamp_us = wire::monotonic_us();
  owner.loop_.submit(cmd, "relay");
  return reply(req, http::status::accepted, json{{"seq", cmd.seq}});
}

namespace {

// True when the peer has sent something (close frame, ping) we should read.
bool readable(int fd) {
  pollfd pfd{fd, POLLIN, 0};
  return ::poll(&pfd, 1, 0) > 0;
}

}  // namespace

void MonitorService::Impl::push_events(tcp::socket sock, const Request& req, const std::string& id) {
  const auto sub = owner.hub_.get(id);
  beast::error_code ec;
  if (!sub) {
    http::write(sock, error_reply(req, http::status::not_found, "no such subscription"), ec);
    return;
  }
  websocket::stream<tcp::socket> ws(std::move(sock));
  ws.accept(req, ec);
  if (ec) return;
  ws.text(true);
  const int fd = ws.next_layer().native_handle();
  beast::flat_buffer in;
  while (!stopping) {
    auto msg = sub->channel->pop(std::chrono::milliseconds(50));
    if (msg) {
      ws.write(asio::buffer(*msg), ec);
      if (ec) return;
      continue;
    }
    if (sub->channel->closed()) break;
    if (readable(fd)) {
      ws.read(in, ec);
      if (ec) return;
      in.consume(in.size());
    }
  }
  ws.close(websocket::close_code::going_away, ec);
}

void MonitorService::Impl::push_frames(tcp::socket sock, const Request& req) {
  beast::error_code ec;
  if (owner.frames_ == nullptr) {
    http::write(sock, error_reply(req, http::status::not_found, "point-cloud stream not active"), ec);
    return;
  }
  websocket::stream<tcp::socket> ws(std::move(sock));
  ws.accept(req, ec);
  if (ec) return;
  ws.binary(true);
  const int fd = ws.next_layer().native_handle();
  const auto min_gap = std::chrono::duration_cast<std::chrono::steady_clock::duration>(
      std::chrono::duration<double>(1.0 / pointcloud::kStreamMaxFps));
  auto last_sent = std::chrono::steady_clock::now() - min_gap;
  std::uint64_t last_id = 0;
  beast::flat_buffer in;
  while (!stopping) {
    if (readable(fd)) {
      ws.read(in, ec);
      if (ec) return;
      in.consume(in.size());
    }
    auto f = owner.frames_->wait_newer(last_id, std::chrono::milliseconds(50));
    if (!f) continue;
    std::this_thread::sleep_until(last_sent + min_gap);
    ws.write(asio::buffer(*f->second), ec);
    if (ec) return;
    last_sent = std::chrono::steady_clock::now();
    last_id = f->first;
  }
  ws.close(websocket::close_code::going_away, ec);
}

}  // namespace cell::monitor
