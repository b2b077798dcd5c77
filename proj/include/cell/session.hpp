#pragma once

#include "cell/control_loop.hpp"
#include "cell/controller.hpp"

#include <cstdint>
#include <fstream>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

// Demonstration log: one JSON object per line, header line first.
//
//   {"schema":"cell-session/1","arm_model":"desk6r","safety":{...},"start_wall_clock":"2026-10-18T09:00:00Z"}
//   {"t_us":..,"seq":..,"target":[x,y,z,qw,qx,qy,qz],"actual":[...],"joints_deg":[6],
//    "gripper":"OPEN","mode":"EXECUTING","annotation":"item_completed"}
namespace cell::session {

inline constexpr const char* kSchema = "cell-session/1";
inline constexpr const char* kExtension = ".cellsession";

struct SessionHeader {
  std::string schema = kSchema;
  std::string arm_model;
  control::SafetyConfig safety;
  std::string start_wall_clock;
};

struct SessionRecord {
  std::uint64_t t_us = 0;
  std::uint32_t seq = 0;
  RobotPose target;
  RobotPose actual;
  JointVector joints_deg{};
  control::GripperState gripper = control::GripperState::Open;
  control::Mode mode = control::Mode::Ready;
  std::optional<std::string> annotation;
};

struct SessionFile {
  SessionHeader header;
  std::vector<SessionRecord> records;
  /// Set when the last line was incomplete and got skipped.
  std::optional<std::string> warning;
};

std::string now_iso8601();

/// Append-only writer; every record is flushed as a complete line.
class SessionWriter {
public:
  SessionWriter(const std::string& path, const SessionHeader& header);
  explicit SessionWriter(std::ostream& out, const SessionHeader& header);

  /// Throws Error unless t_us is strictly greater than the previous record's.
  void append(const SessionRecord& r);
  void flush();
  std::size_t count() const { return count_; }

private:
  void write_header(const SessionHeader& h);

  std::ofstream file_;
  std::ostream* out_;
  std::size_t count_ = 0;
  std::optional<std::uint64_t> last_t_;
};

/// Throws UnsupportedSchema on a missing or unknown header, Error on a
/// corrupt record before the last line.
SessionFile read_session(std::istream& in);
SessionFile load_session(const std::string& path);

std::string encode_record(const SessionRecord& r);

/// Builds records from the live feedback stream of a CommandClient.
class Recorder {
public:
  explicit Recorder(SessionWriter& writer) : writer_(writer) {}

  /// Log one feedback datagram with the target and gripper the client last sent.
  void on_feedback(const wire::Feedback& fb, const RobotPose& target, control::GripperState gripper);
  /// Attach a tag to the next record.
  void annotate(std::string tag) { pending_annotation_ = std::move(tag); }
  std::size_t count() const { return writer_.count(); }

private:
  SessionWriter& writer_;
  std::optional<std::string> pending_annotation_;
};

struct ReplayStats {
  std::size_t sent = 0;
  double elapsed_s = 0.0;
  double original_s = 0.0;
};

/// Re-sends the recorded targets through `client`, keeping the original
/// inter-record spacing divided by `speed`.
ReplayStats replay(const SessionFile& file, control::CommandClient& client, double speed);

/// Feeds the recorded targets into `controller`, one control cycle per record,
/// and returns the resulting TCP trace.
std::vector<RobotPose> replay_offline(const SessionFile& file, control::Controller& controller);

}  // namespace cell::session
