#include "cell/wire.hpp"

#include "cell/error.hpp"

#include <bit>
#include <chrono>
#include <cmath>

namespace cell::wire {
namespace {

constexpr std::uint8_t kMagic[4] = {0x45, 0x47, 0x4D, 0x31};
constexpr double kQuatNormTol = 1e-6;

class Writer {
public:
  explicit Writer(std::size_t size) { buf_.reserve(size); }

  void u8(std::uint8_t v) { buf_.push_back(v); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void pose(const RobotPose& p) {
    for (int i = 0; i < 3; ++i) f64(p.position_mm[i]);
    f64(p.orientation.w());
    f64(p.orientation.x());
    f64(p.orientation.y());
    f64(p.orientation.z());
  }

  std::vector<std::uint8_t> take() { return std::move(buf_); }

private:
  std::vector<std::uint8_t> buf_;
};

class Reader {
public:
  explicit Reader(std::span<const std::uint8_t> bytes) : b_(bytes) {}

  std::uint8_t u8() { return b_[pos_++]; }
  std::uint32_t u32() {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b_[pos_++]) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b_[pos_++]) << (8 * i);
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  RobotPose pose() {
    RobotPose p;
    for (int i = 0; i < 3; ++i) p.position_mm[i] = f64();
    const double w = f64(), x = f64(), y = f64(), z = f64();
    p.orientation = Eigen::Quaterniond(w, x, y, z);
    return p;
  }

private:
  std::span<const std::uint8_t> b_;
  std::size_t pos_ = 0;
};

bool pose_valid(const RobotPose& p) {
  return p.finite() && std::abs(p.orientation.norm() - 1.0) <= kQuatNormTol;
}

void header(Writer& w, MsgType type, std::uint32_t seq, std::uint64_t ts) {
  for (auto b : kMagic) w.u8(b);
  w.u8(static_cast<std::uint8_t>(type));
  w.u32(seq);
  w.u64(ts);
}

std::vector<std::uint8_t> encode_command(const Command& c) {
  if (!pose_valid(c.target)) throw EncodeError("command target is not a finite unit-quaternion pose");
  if (static_cast<std::uint8_t>(c.gripper) > 2) throw EncodeError("gripper action out of range");
  Writer w(kCommandSize);
  header(w, MsgType::Command, c.seq, c.timestamp_us);
  w.pose(c.target);
  w.u8(static_cast<std::uint8_t>(c.gripper));
  return w.take();
}

std::vector<std::uint8_t> encode_feedback(const Feedback& f) {
  if (!pose_valid(f.actual)) throw EncodeError("feedback pose is not a finite unit-quaternion pose");
  for (double j : f.joints_deg) {
    if (!std::isfinite(j)) throw EncodeError("feedback joint angle is not finite");
  }
  const auto s = static_cast<std::uint8_t>(f.state);
  if (s < 1 || s > 3) throw EncodeError("feedback state out of range");
  Writer w(kFeedbackSize);
  header(w, MsgType::Feedback, f.seq, f.timestamp_us);
  for (double j : f.joints_deg) w.f64(j);
  w.pose(f.actual);
  w.u8(s);
  w.u32(f.echo_seq);
  return w.take();
}

}  // namespace

std::string_view to_string(DecodeError e) {
  switch (e) {
    case DecodeError::Truncated: return "truncated";
    case DecodeError::BadMagic: return "bad magic";
    case DecodeError::UnknownType: return "unknown message type";
    case DecodeError::LengthMismatch: return "length mismatch";
    case DecodeError::InvalidPayload: return "invalid payload";
  }
  return "unknown";
}

std::vector<std::uint8_t> encode(const Message& msg) {
  if (const auto* c = std::get_if<Command>(&msg)) return encode_command(*c);
  return encode_feedback(std::get<Feedback>(msg));
}

Expected<Message, DecodeError> decode(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kHeaderSize) return DecodeError::Truncated;
  for (int i = 0; i < 4; ++i) {
    if (bytes[static_cast<std::size_t>(i)] != kMagic[i]) return DecodeError::BadMagic;
  }
  Reader r(bytes.subspan(4));
  const std::uint8_t type = r.u8();
  std::size_t expected = 0;
  if (type == static_cast<std::uint8_t>(MsgType::Command)) {
    expected = kCommandSize;
  } else if (type == static_cast<std::uint8_t>(MsgType::Feedback)) {
    expected = kFeedbackSize;
  } else {
    return DecodeError::UnknownType;
  }
  if (bytes.size() < expected) return DecodeError::Truncated;
  if (bytes.size() > expected) return DecodeError::LengthMismatch;

  const std::uint32_t seq = r.u32();
  const std::uint64_t ts = r.u64();
  if (type == static_cast<std::uint8_t>(MsgType::Command)) {
    Command c;
    c.seq = seq;
    c.timestamp_us = ts;
    c.target = r.pose();
    const std::uint8_t g = r.u8();
    if (g > 2 || !pose_valid(c.target)) return DecodeError::InvalidPayload;
    c.gripper = static_cast<GripperAction>(g);
    return Message{c};
  }
  Feedback f;
  f.seq = seq;
  f.timestamp_us = ts;
  for (double& j : f.joints_deg) j = r.f64();
  f.actual = r.pose();
  const std::uint8_t s = r.u8();
  f.echo_seq = r.u32();
  if (s < 1 || s > 3 || !pose_valid(f.actual)) return DecodeError::InvalidPayload;
  for (double j : f.joints_deg) {
    if (!std::isfinite(j)) return DecodeError::InvalidPayload;
  }
  f.state = static_cast<WireState>(s);
  return Message{f};
}

std::uint64_t monotonic_us() {
  using namespace std::chrono;
  return static_cast<std::uint64_t>(duration_cast<microseconds>(steady_clock::now().time_since_epoch()).count());
}

}  // namespace cell::wire
