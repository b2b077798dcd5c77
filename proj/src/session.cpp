#include "cell/session.hpp"

#include "cell/error.hpp"
#include "json.hpp"

#include <chrono>
#include <ctime>
#include <iostream>
#include <sstream>
#include <thread>

namespace cell::session {
namespace {

using json = nlohmann::json;

json pose_array(const RobotPose& p) {
  return json::array({p.position_mm.x(), p.position_mm.y(), p.position_mm.z(), p.orientation.w(), p.orientation.x(),
                      p.orientation.y(), p.orientation.z()});
}

RobotPose pose_from(const json& a) {
  const auto v = a.get<std::vector<double>>();
  if (v.size() != 7) throw std::invalid_argument("pose needs 7 numbers");
  RobotPose p;
  p.position_mm = Eigen::Vector3d(v[0], v[1], v[2]);
  p.orientation = Eigen::Quaterniond(v[3], v[4], v[5], v[6]);
  return p;
}

control::Mode mode_from(const std::string& s) {
  using control::Mode;
  if (s == "READY") return Mode::Ready;
  if (s == "EXECUTING") return Mode::Executing;
  if (s == "ERROR") return Mode::Error;
  if (s == "DISCONNECTED") return Mode::Disconnected;
  throw std::invalid_argument("unknown mode " + s);
}

json safety_json(const control::SafetyConfig& s) {
  return json{{"max_speed_deviation_mm_s", s.max_speed_deviation_mm_s},
              {"lp_cutoff_hz", s.lp_cutoff_hz},
              {"max_orient_rate_deg_s", s.max_orient_rate_deg_s},
              {"speed_violation_factor", s.speed_violation_factor},
              {"speed_violation_window_s", s.speed_violation_window_s},
              {"hold_timeout_s", s.hold_timeout_s},
              {"w_min", s.w_min}};
}

control::SafetyConfig safety_from(const json& j) {
  control::SafetyConfig s;
  s.max_speed_deviation_mm_s = j.value("max_speed_deviation_mm_s", s.max_speed_deviation_mm_s);
  s.lp_cutoff_hz = j.value("lp_cutoff_hz", s.lp_cutoff_hz);
  s.max_orient_rate_deg_s = j.value("max_orient_rate_deg_s", s.max_orient_rate_deg_s);
  s.speed_violation_factor = j.value("speed_violation_factor", s.speed_violation_factor);
  s.speed_violation_window_s = j.value("speed_violation_window_s", s.speed_violation_window_s);
  s.hold_timeout_s = j.value("hold_timeout_s", s.hold_timeout_s);
  s.w_min = j.value("w_min", s.w_min);
  return s;
}

SessionRecord decode_record(const std::string& line) {
  const json j = json::parse(line);
  SessionRecord r;
  r.t_us = j.at("t_us").get<std::uint64_t>();
  r.seq = j.at("seq").get<std::uint32_t>();
  r.target = pose_from(j.at("target"));
  r.actual = pose_from(j.at("actual"));
  const auto q = j.at("joints_deg").get<std::vector<double>>();
  if (q.size() != 6) throw std::invalid_argument("joints_deg needs 6 numbers");
  std::copy(q.begin(), q.end(), r.joints_deg.begin());
  const auto g = j.at("gripper").get<std::string>();
  if (g != "OPEN" && g != "CLOSED") throw std::invalid_argument("bad gripper");
  r.gripper = g == "OPEN" ? control::GripperState::Open : control::GripperState::Closed;
  r.mode = mode_from(j.at("mode").get<std::string>());
  if (j.contains("annotation") && !j["annotation"].is_null()) r.annotation = j["annotation"].get<std::string>();
  return r;
}

}  // namespace

std::string now_iso8601() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string encode_record(const SessionRecord& r) {
  json j{{"t_us", r.t_us},
         {"seq", r.seq},
         {"target", pose_array(r.target)},
         {"actual", pose_array(r.actual)},
         {"joints_deg", r.joints_deg},
         {"gripper", control::to_string(r.gripper)},
         {"mode", control::to_string(r.mode)}};
  if (r.annotation) j["annotation"] = *r.annotation;
  return j.dump();
}

SessionWriter::SessionWriter(const std::string& path, const SessionHeader& header) : file_(path), out_(&file_) {
  if (!file_) throw Error("cannot open session file '" + path + "' for writing");
  write_header(header);
}

SessionWriter::SessionWriter(std::ostream& out, const SessionHeader& header) : out_(&out) { write_header(header); }

void SessionWriter::write_header(const SessionHeader& h) {
  json j{{"schema", h.schema},
         {"arm_model", h.arm_model},
         {"safety", safety_json(h.safety)},
         {"start_wall_clock", h.start_wall_clock.empty() ? now_iso8601() : h.start_wall_clock}};
  *out_ << j.dump() << '\n';
  out_->flush();
}

void SessionWriter::append(const SessionRecord& r) {
  if (last_t_ && r.t_us <= *last_t_) throw Error("session records must have strictly increasing t_us");
  last_t_ = r.t_us;
  *out_ << encode_record(r) << '\n';
  ++count_;
}

void SessionWriter::flush() { out_->flush(); }

SessionFile read_session(std::istream& in) {
  SessionFile f;
  std::string line;
  if (!std::getline(in, line)) throw UnsupportedSchema("session file is empty");
  try {
    const json h = json::parse(line);
    f.header.schema = h.at("schema").get<std::string>();
    if (f.header.schema != kSchema) throw UnsupportedSchema("unsupported session schema '" + f.header.schema + "'");
    f.header.arm_model = h.value("arm_model", "");
    f.header.safety = safety_from(h.value("safety", json::object()));
    f.header.start_wall_clock = h.value("start_wall_clock", "");
  } catch (const UnsupportedSchema&) {
    throw;
  } catch (const std::exception&) {
    throw UnsupportedSchema("session header is not a recognized schema line");
  }

  std::size_t lineno = 1;
  std::optional<std::string> bad;
  std::size_t bad_line = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (bad) throw Error("corrupt session record at line " + std::to_string(bad_line));
    try {
      f.records.push_back(decode_record(line));
      if (f.records.size() > 1 && f.records.back().t_us <= f.records[f.records.size() - 2].t_us) {
        throw Error("session t_us not increasing at line " + std::to_string(lineno));
      }
    } catch (const Error&) {
      throw;
    } catch (const std::exception& e) {
      bad = e.what();
      bad_line = lineno;
    }
  }
  if (bad) f.warning = "skipped incomplete record at line " + std::to_string(bad_line);
  return f;
}

SessionFile load_session(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open session file '" + path + "'");
  return read_session(in);
}

void Recorder::on_feedback(const wire::Feedback& fb, const RobotPose& target, control::GripperState gripper) {
  SessionRecord r;
  r.t_us = fb.timestamp_us;
  r.seq = fb.echo_seq;
  r.target = target;
  r.actual = fb.actual;
  r.joints_deg = fb.joints_deg;
  r.gripper = gripper;
  switch (fb.state) {
    case wire::WireState::Ready: r.mode = control::Mode::Ready; break;
    case wire::WireState::Executing: r.mode = control::Mode::Executing; break;
    case wire::WireState::Error: r.mode = control::Mode::Error; break;
  }
  r.annotation = std::exchange(pending_annotation_, std::nullopt);
  writer_.append(r);
}

ReplayStats replay(const SessionFile& file, control::CommandClient& client, double speed) {
  if (!(speed > 0.0)) throw Error("replay speed must be > 0");
  ReplayStats st;
  if (file.records.empty()) return st;
  using clock = std::chrono::steady_clock;
  const std::uint64_t t0 = file.records.front().t_us;
  st.original_s = static_cast<double>(file.records.back().t_us - t0) * 1e-6;
  const auto start = clock::now();
  auto gripper = control::GripperState::Open;  // controller power-on state
  for (const auto& r : file.records) {
    const auto offset = std::chrono::duration<double>(static_cast<double>(r.t_us - t0) * 1e-6 / speed);
    std::this_thread::sleep_until(start + std::chrono::duration_cast<clock::duration>(offset));
    auto action = wire::GripperAction::Hold;
    if (gripper != r.gripper) {
      action = r.gripper == control::GripperState::Open ? wire::GripperAction::Open : wire::GripperAction::Close;
    }
    gripper = r.gripper;
    client.send(r.target, action);
    ++st.sent;
  }
  st.elapsed_s = std::chrono::duration<double>(clock::now() - start).count();
  return st;
}

std::vector<RobotPose> replay_offline(const SessionFile& file, control::Controller& controller) {
  std::vector<RobotPose> trace;
  trace.reserve(file.records.size());
  controller.connect();
  for (const auto& r : file.records) {
    controller.set_target(r.target, r.t_us, r.seq);
    if (r.gripper != controller.state().gripper) {
      controller.gripper_command(r.gripper == control::GripperState::Open ? wire::GripperAction::Open
                                                                           : wire::GripperAction::Close);
    }
    controller.step(control::kCycleS);
    trace.push_back(controller.state().pose);
  }
  return trace;
}

}  // namespace cell::session
