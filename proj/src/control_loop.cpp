#include "cell/control_loop.hpp"

#include <chrono>

#include <sys/prctl.h>

namespace cell::control {

ControlLoop::ControlLoop(Controller controller, LoopConfig cfg) : controller_(std::move(controller)), cfg_(cfg) {
  snap_.state = controller_.state();
  snap_.target = controller_.target();
}

ControlLoop::~ControlLoop() { stop(); }

void ControlLoop::start() {
  if (running_) return;
  stop_ = false;
  running_ = true;
  thread_ = std::thread([this] { run(); });
}

void ControlLoop::stop() {
  stop_ = true;
  if (thread_.joinable()) thread_.join();
  running_ = false;
  // Fail nothing silently: requests that raced the shutdown still execute.
  std::deque<std::function<void(Controller&)>> pending;
  {
    std::lock_guard lk(inbox_mu_);
    pending.swap(requests_);
  }
  for (auto& r : pending) r(controller_);
}

void ControlLoop::submit(const wire::Command& cmd, const std::string& source) {
  std::lock_guard lk(inbox_mu_);
  if (inbox_.size() >= cfg_.inbox_capacity) {
    inbox_.pop_front();
    ++dropped_;
  }
  inbox_.push_back({cmd, source});
}

void ControlLoop::set_feedback_sink(FeedbackSink sink) {
  std::lock_guard lk(hooks_mu_);
  sink_ = std::move(sink);
}

void ControlLoop::add_event_listener(EventListener listener) {
  std::lock_guard lk(hooks_mu_);
  listeners_.push_back(std::move(listener));
}

template <typename F>
auto ControlLoop::request(F&& fn) -> decltype(fn(std::declval<Controller&>())) {
  using R = decltype(fn(std::declval<Controller&>()));
  if (!running_) {
    R r = fn(controller_);
    publish_events();
    return r;
  }
  // Publish before the caller wakes so its next snapshot already shows the result.
  auto task = std::make_shared<std::packaged_task<R(Controller&)>>([this, fn = std::forward<F>(fn)](Controller& c) mutable {
    R r = fn(c);
    publish_events();
    return r;
  });
  auto fut = task->get_future();
  {
    std::lock_guard lk(inbox_mu_);
    requests_.emplace_back([task](Controller& c) { (*task)(c); });
  }
  return fut.get();
}

Mode ControlLoop::connect() {
  return request([this](Controller& c) {
    auto_connect_ = true;
    c.connect();
    return c.state().mode;
  });
}

Mode ControlLoop::disconnect() {
  return request([this](Controller& c) {
    auto_connect_ = false;
    last_seq_.clear();
    c.disconnect();
    return c.state().mode;
  });
}

Mode ControlLoop::restart() {
  return request([](Controller& c) { return c.restart(); });
}

GripperAck ControlLoop::gripper(wire::GripperAction action) {
  return request([action](Controller& c) { return c.gripper_command(action); });
}

void ControlLoop::inject_fault(ErrorCode code) {
  request([code](Controller& c) {
    c.inject_fault(code);
    return 0;
  });
}

Snapshot ControlLoop::snapshot() const {
  std::lock_guard lk(snap_mu_);
  return snap_;
}

void ControlLoop::run() {
  using clock = std::chrono::steady_clock;
  const auto period = std::chrono::duration_cast<clock::duration>(std::chrono::duration<double>(1.0 / cfg_.rate_hz));
  // Fixed timeline: a late wakeup is made up by the following cycles so the
  // average rate holds. Only a long stall (debugger, suspend) resyncs.
  const auto max_lag = 25 * period;
  prctl(PR_SET_TIMERSLACK, 1UL, 0UL, 0UL, 0UL);
  auto next = clock::now();
  while (!stop_) {
    tick();
    next += period;
    const auto now = clock::now();
    if (now > next + max_lag) next = now;
    std::this_thread::sleep_until(next);
  }
}

void ControlLoop::apply_commands() {
  std::deque<Inbound> batch;
  std::deque<std::function<void(Controller&)>> reqs;
  {
    std::lock_guard lk(inbox_mu_);
    batch.swap(inbox_);
    reqs.swap(requests_);
  }
  for (auto& r : reqs) r(controller_);

  for (const auto& in : batch) {
    if (controller_.state().mode == Mode::Disconnected) {
      if (!auto_connect_) continue;
      // First command of a session is the handshake.
      last_seq_.clear();
      controller_.connect();
    }
    auto it = last_seq_.find(in.source);
    if (it != last_seq_.end() && !wire::seq_newer(in.cmd.seq, it->second)) {
      ++stale_;
      continue;
    }
    last_seq_[in.source] = in.cmd.seq;
    controller_.set_target(in.cmd.target, in.cmd.timestamp_us, in.cmd.seq);
    ++applied_;
    if (in.cmd.gripper != wire::GripperAction::Hold) controller_.gripper_command(in.cmd.gripper);
  }
}

void ControlLoop::publish_events() {
  const auto events = controller_.drain_events();
  if (!events.empty()) {
    std::lock_guard lk(hooks_mu_);
    for (const auto& e : events) {
      for (auto& l : listeners_) l(e, controller_.state());
    }
  }
  std::lock_guard lk(snap_mu_);
  snap_.state = controller_.state();
  snap_.target = controller_.target();
  snap_.cycle = cycle_;
}

void ControlLoop::tick() {
  apply_commands();
  controller_.step(1.0 / cfg_.rate_hz);
  ++cycle_;
  publish_events();

  if (controller_.state().mode == Mode::Disconnected) return;
  const wire::Feedback fb = controller_.feedback(++feedback_seq_, wire::monotonic_us());
  FeedbackSink sink;
  {
    std::lock_guard lk(hooks_mu_);
    sink = sink_;
  }
  if (sink) sink(fb);
  ++feedback_count_;
}

WireServer::WireServer(ControlLoop& loop, std::uint16_t port, const std::string& host) : loop_(loop) {
  socket_.bind(port, host);
  port_ = socket_.local_port();
  loop_.set_feedback_sink([this](const wire::Feedback& fb) {
    std::optional<net::Endpoint> peer;
    {
      std::lock_guard lk(peer_mu_);
      peer = peer_;
    }
    if (!peer) return;
    try {
      socket_.send_to(wire::encode(fb), *peer);
    } catch (const Error&) {
      // Best effort: a vanished peer must not stop the control loop.
    }
  });
  rx_ = std::thread([this] { receive_loop(); });
}

WireServer::~WireServer() { stop(); }

void WireServer::stop() {
  stop_ = true;
  if (rx_.joinable()) rx_.join();
  loop_.set_feedback_sink(nullptr);
}

void WireServer::receive_loop() {
  std::vector<std::uint8_t> buf(2048);
  while (!stop_) {
    auto got = socket_.receive(buf, std::chrono::milliseconds(50));
    if (!got) continue;
    auto msg = wire::decode(std::span(buf.data(), got->size));
    if (!msg) {
      ++decode_errors_;
      continue;
    }
    const auto* cmd = std::get_if<wire::Command>(&*msg);
    if (cmd == nullptr) continue;
    {
      std::lock_guard lk(peer_mu_);
      peer_ = got->from;
    }
    loop_.submit(*cmd, got->from.str());
  }
}

CommandClient::CommandClient(const std::string& host, std::uint16_t port)
    : server_(net::Endpoint::resolve(host, port)) {
  socket_.bind(0, "0.0.0.0");
}

std::uint32_t CommandClient::send(const RobotPose& target, wire::GripperAction gripper) {
  wire::Command c;
  c.seq = ++seq_;
  c.timestamp_us = wire::monotonic_us();
  c.target = target;
  c.gripper = gripper;
  socket_.send_to(wire::encode(c), server_);
  return c.seq;
}

void CommandClient::send_raw(const wire::Command& cmd) { socket_.send_to(wire::encode(cmd), server_); }

std::optional<wire::Feedback> CommandClient::receive(std::chrono::milliseconds timeout) {
  std::vector<std::uint8_t> buf(2048);
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  for (;;) {
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
    auto got = socket_.receive(buf, std::max(left, std::chrono::milliseconds(0)));
    if (!got) return std::nullopt;
    auto msg = wire::decode(std::span(buf.data(), got->size));
    if (msg) {
      if (const auto* fb = std::get_if<wire::Feedback>(&*msg)) return *fb;
    }
    if (std::chrono::steady_clock::now() >= deadline) return std::nullopt;
  }
}

}  // namespace cell::control
