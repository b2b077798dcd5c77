#pragma once

#include "cell/expected.hpp"
#include "cell/pose.hpp"

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <variant>
#include <vector>

// Binary position-stream protocol. All multi-byte fields little-endian.
//
//   offset size  field
//   0      4     magic "EGM1" (45 47 4D 31)
//   4      1     msg_type: 1 = COMMAND, 2 = FEEDBACK
//   5      4     seq (u32)
//   9      8     timestamp_us (u64, sender monotonic clock)
//
// COMMAND payload (57 bytes): position x,y,z mm (3 x f64), quaternion w,x,y,z
// (4 x f64), gripper (u8: 0 hold, 1 open, 2 close).
//
// FEEDBACK payload (109 bytes): joints_deg (6 x f64), actual pose (7 x f64 as
// above), state (u8: 1 READY, 2 EXECUTING, 3 ERROR), echo_seq (u32).
namespace cell::wire {

inline constexpr std::size_t kHeaderSize = 17;
inline constexpr std::size_t kCommandSize = kHeaderSize + 57;
inline constexpr std::size_t kFeedbackSize = kHeaderSize + 109;
inline constexpr std::uint16_t kDefaultPort = 6510;

enum class MsgType : std::uint8_t { Command = 1, Feedback = 2 };
enum class GripperAction : std::uint8_t { Hold = 0, Open = 1, Close = 2 };
enum class WireState : std::uint8_t { Ready = 1, Executing = 2, Error = 3 };

struct Command {
  std::uint32_t seq = 0;
  std::uint64_t timestamp_us = 0;
  RobotPose target;
  GripperAction gripper = GripperAction::Hold;

  bool operator==(const Command&) const = default;
};

struct Feedback {
  std::uint32_t seq = 0;
  std::uint64_t timestamp_us = 0;
  JointVector joints_deg{};
  RobotPose actual;
  WireState state = WireState::Ready;
  std::uint32_t echo_seq = 0;

  bool operator==(const Feedback&) const = default;
};

using Message = std::variant<Command, Feedback>;

enum class DecodeError {
  Truncated,
  BadMagic,
  UnknownType,
  LengthMismatch,
  InvalidPayload,
};

std::string_view to_string(DecodeError e);

/// Throws EncodeError if the payload invariants do not hold.
std::vector<std::uint8_t> encode(const Message& msg);

/// Total: every input either decodes to a valid message or yields a DecodeError.
Expected<Message, DecodeError> decode(std::span<const std::uint8_t> bytes);

/// Monotonic microseconds used for header timestamps.
std::uint64_t monotonic_us();

/// True when `seq` is newer than `last` under 32-bit wraparound.
constexpr bool seq_newer(std::uint32_t seq, std::uint32_t last) {
  return static_cast<std::int32_t>(seq - last) > 0;
}

}  // namespace cell::wire
