// cell: desk-scale teleoperation cell. Controller simulator, wire endpoint,
// monitoring service, synthetic depth camera, and the client-side tools.

#include "cell/analysis.hpp"
#include "cell/config.hpp"
#include "cell/control_loop.hpp"
#include "cell/error.hpp"
#include "cell/frames.hpp"
#include "cell/monitor.hpp"
#include "cell/monitor_client.hpp"
#include "cell/pointcloud.hpp"
#include "cell/session.hpp"
#include "cell/udp.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <csignal>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <thread>

using namespace cell;
using namespace std::chrono_literals;
using json = nlohmann::json;

namespace {

constexpr int kOk = 0;
constexpr int kRuntime = 1;
constexpr int kUsage = 2;

struct UsageError : Error {
  using Error::Error;
};

// ---------------------------------------------------------------- run

struct RunOptions {
  std::string config;
  std::string host = "0.0.0.0";
  int wire_port = -1;
  int http_port = -1;
  std::string synth_scene;
  std::int64_t seed = -1;
  double duration_s = 0.0;
};

void camera_loop(const pointcloud::SceneSpec& spec, const pointcloud::PipelineParams& params,
                 monitor::FrameBroadcaster& out, const std::atomic<bool>& stop) {
  const pointcloud::SyntheticScene scene(spec);
  pointcloud::Pipeline pipe(params);
  const auto period = std::chrono::duration_cast<std::chrono::steady_clock::duration>(
      std::chrono::duration<double>(1.0 / pointcloud::kStreamMaxFps));
  auto next = std::chrono::steady_clock::now();
  for (std::uint64_t k = 0; !stop; ++k) {
    auto cloud = pointcloud::decimate(pipe.process(scene.frame(k)), pointcloud::kStreamMaxPoints);
    out.publish(pointcloud::encode_stream_frame(cloud));
    next += period;
    std::this_thread::sleep_until(next);
  }
}

int cmd_run(const RunOptions& o) {
  CellConfig cfg;
  if (!o.config.empty()) cfg.load(o.config);
  if (o.wire_port >= 0) cfg.wire_port = static_cast<std::uint16_t>(o.wire_port);
  if (o.http_port >= 0) cfg.http_port = static_cast<std::uint16_t>(o.http_port);

  std::optional<pointcloud::SceneSpec> scene;
  if (!o.synth_scene.empty()) {
    scene = pointcloud::SceneSpec::parse(o.synth_scene);
    if (o.seed >= 0) scene->seed = static_cast<std::uint64_t>(o.seed);
  }

  // Signals go to sigwait below, not to whichever thread happens to run.
  sigset_t sigs;
  sigemptyset(&sigs);
  sigaddset(&sigs, SIGINT);
  sigaddset(&sigs, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &sigs, nullptr);

  control::ControlLoop loop(control::Controller(cfg.arm, cfg.safety), control::LoopConfig{cfg.rate_hz, 64});
  monitor::FrameBroadcaster frames;
  control::WireServer wire(loop, cfg.wire_port, o.host);
  monitor::MonitorService service(loop, monitor::MonitorConfig{cfg.http_port, o.host, 256}, scene ? &frames : nullptr);
  service.start();
  loop.start();

  std::atomic<bool> stop{false};
  std::thread camera;
  if (scene) camera = std::thread(camera_loop, *scene, cfg.pipeline, std::ref(frames), std::cref(stop));

  std::cout << "cell listening wire=udp:" << wire.port() << " http=tcp:" << service.port()
            << (scene ? " pointcloud=on" : "") << std::endl;

  if (o.duration_s > 0.0) {
    timespec ts{};
    ts.tv_sec = static_cast<time_t>(o.duration_s);
    ts.tv_nsec = static_cast<long>((o.duration_s - static_cast<double>(ts.tv_sec)) * 1e9);
    sigtimedwait(&sigs, nullptr, &ts);
  } else {
    int sig = 0;
    sigwait(&sigs, &sig);
  }

  stop = true;
  frames.close();
  if (camera.joinable()) camera.join();
  service.stop();
  wire.stop();
  loop.stop();
  std::cout << "cell stopped after " << loop.snapshot().cycle << " cycles" << std::endl;
  return kOk;
}

// ---------------------------------------------------------------- teleop

struct Waypoint {
  RobotPose pose;
  wire::GripperAction gripper = wire::GripperAction::Hold;
  std::string annotation;
};

std::vector<Waypoint> read_waypoints(const std::string& path, bool ar_frame, const frames::AxisPermutation& perm) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open waypoint file '" + path + "'");
  std::vector<Waypoint> out;
  std::string line;
  for (int lineno = 1; std::getline(in, line); ++lineno) {
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string tok; std::getline(ss, tok, ',');) {
      const auto b = tok.find_first_not_of(" \t\r"), e = tok.find_last_not_of(" \t\r");
      f.push_back(b == std::string::npos ? "" : tok.substr(b, e - b + 1));
    }
    const std::string where = path + ":" + std::to_string(lineno) + ": ";
    if (f.size() < 7 || f.size() > 9) throw UsageError(where + "expected x,y,z,qw,qx,qy,qz[,gripper[,annotation]]");
    double v[7];
    for (int i = 0; i < 7; ++i) {
      std::size_t used = 0;
      try {
        v[i] = std::stod(f[static_cast<std::size_t>(i)], &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used == 0 || used != f[static_cast<std::size_t>(i)].size()) throw UsageError(where + "'" + f[static_cast<std::size_t>(i)] + "' is not a number");
    }
    Waypoint w;
    const Eigen::Vector3d p(v[0], v[1], v[2]);
    const Eigen::Quaterniond q(v[3], v[4], v[5], v[6]);
    try {
      if (ar_frame) {
        w.pose = frames::ar_to_robot(ArPose{p, q}, perm);
      } else {
        w.pose.position_mm = p;
        w.pose.orientation = q;
        if (!w.pose.finite() || std::abs(q.norm() - 1.0) > 1e-6) throw InvalidPose("non-finite pose or non-unit quaternion");
      }
    } catch (const InvalidPose& e) {
      throw UsageError(where + e.what());
    }
    if (f.size() >= 8 && !f[7].empty()) {
      if (f[7] == "open") {
        w.gripper = wire::GripperAction::Open;
      } else if (f[7] == "close") {
        w.gripper = wire::GripperAction::Close;
      } else if (f[7] != "hold") {
        throw UsageError(where + "gripper must be open, close or hold");
      }
    }
    if (f.size() == 9) w.annotation = f[8];
    out.push_back(std::move(w));
  }
  if (out.empty()) throw UsageError("waypoint file '" + path + "' has no waypoints");
  return out;
}

struct TeleopOptions {
  std::string waypoints;
  std::string host = "127.0.0.1";
  std::uint16_t wire_port = wire::kDefaultPort;
  std::uint16_t http_port = monitor::kDefaultHttpPort;
  double speed_mm_s = 40.0;
  double tolerance_mm = 0.5;
  double settle_timeout_s = 10.0;
  std::string record;
  bool ar_frame = false;
  std::string config;
};

class Teleop {
public:
  Teleop(const TeleopOptions& o, session::Recorder* rec) : client_(o.host, o.wire_port), rec_(rec) {}

  // Streams one command per cycle and drains feedback; false once the
  // controller reports ERROR.
  bool tick(const RobotPose& target, wire::GripperAction g = wire::GripperAction::Hold) {
    client_.send(target, g);
    if (g == wire::GripperAction::Open) gripper_ = control::GripperState::Open;
    if (g == wire::GripperAction::Close) gripper_ = control::GripperState::Closed;
    next_ += 4ms;
    std::this_thread::sleep_until(next_);
    bool ok = true;
    while (auto fb = client_.receive(0ms)) {
      last_ = *fb;
      if (rec_ != nullptr && fb->timestamp_us > last_t_) {
        last_t_ = fb->timestamp_us;
        rec_->on_feedback(*fb, target, gripper_);
      }
      if (fb->state == wire::WireState::Error) ok = false;
    }
    return ok;
  }

  void start() { next_ = std::chrono::steady_clock::now(); }
  const std::optional<wire::Feedback>& last() const { return last_; }

private:
  control::CommandClient client_;
  session::Recorder* rec_;
  std::optional<wire::Feedback> last_;
  std::chrono::steady_clock::time_point next_;
  control::GripperState gripper_ = control::GripperState::Open;
  std::uint64_t last_t_ = 0;
};

int cmd_teleop(const TeleopOptions& o) {
  CellConfig cfg;
  if (!o.config.empty()) cfg.load(o.config);
  if (!(o.speed_mm_s > 0.0)) throw UsageError("--speed-mm-s must be > 0");
  const auto waypoints = read_waypoints(o.waypoints, o.ar_frame, cfg.permutation);

  std::optional<session::SessionWriter> writer;
  std::optional<session::Recorder> recorder;
  if (!o.record.empty()) {
    session::SessionHeader h;
    h.arm_model = cfg.arm.id;
    h.safety = cfg.safety;
    h.start_wall_clock = session::now_iso8601();
    writer.emplace(o.record, h);
    recorder.emplace(*writer);
  }
  Teleop t(o, recorder ? &*recorder : nullptr);

  // Low-frequency side first: connect over HTTP and read where the arm is.
  monitor::MonitorClient http(o.host, o.http_port);
  json status = json::parse(http.get("/rw/status").body);
  if (status.at("mode") == "ERROR") {
    std::cerr << "error: controller has an active error; restart it first" << std::endl;
    return kRuntime;
  }
  if (status.at("mode") == "DISCONNECTED") status = json::parse(http.post("/connect").body);
  const auto p = status.at("actual").at("position_mm").get<std::vector<double>>();
  const auto q = status.at("actual").at("quaternion").get<std::vector<double>>();
  RobotPose current;
  current.position_mm = Eigen::Vector3d(p[0], p[1], p[2]);
  current.orientation = Eigen::Quaterniond(q[0], q[1], q[2], q[3]).normalized();

  // The stream starts at the current pose; wait for the first feedback.
  t.start();
  for (int i = 0; i < 250 && !t.last(); ++i) t.tick(current);
  if (!t.last()) {
    std::cerr << "error: no feedback from " << o.host << ":" << o.wire_port << std::endl;
    return kRuntime;
  }
  bool ok = t.tick(current);

  for (std::size_t i = 0; ok && i < waypoints.size(); ++i) {
    const Waypoint& w = waypoints[i];
    const double dist = (w.pose.position_mm - current.position_mm).norm();
    const double angle = angular_distance(current.orientation, w.pose.orientation) * kinematics::kRadToDeg;
    const int steps = std::max(1, static_cast<int>(std::ceil(std::max(dist / o.speed_mm_s, angle / 20.0) / 0.004)));
    const RobotPose from = current;
    for (int k = 1; ok && k <= steps; ++k) {
      const double s = static_cast<double>(k) / steps;
      current.position_mm = from.position_mm + s * (w.pose.position_mm - from.position_mm);
      current.orientation = from.orientation.slerp(s, w.pose.orientation).normalized();
      ok = t.tick(current);
    }
    const auto deadline = std::chrono::steady_clock::now() + std::chrono::duration<double>(o.settle_timeout_s);
    while (ok && (t.last()->actual.position_mm - w.pose.position_mm).norm() > o.tolerance_mm &&
           std::chrono::steady_clock::now() < deadline)
      ok = t.tick(w.pose);
    if (!ok) break;
    if (!w.annotation.empty() && recorder) recorder->annotate(w.annotation);
    ok = t.tick(w.pose, w.gripper);
    std::cout << "waypoint " << (i + 1) << "/" << waypoints.size() << " reached, error "
              << std::fixed << std::setprecision(3)
              << (t.last()->actual.position_mm - w.pose.position_mm).norm() << " mm" << std::endl;
  }
  // Let the last feedback land in the recording.
  for (int k = 0; ok && k < 5; ++k) ok = t.tick(waypoints.back().pose);
  if (writer) writer->flush();

  if (!ok) {
    std::cerr << "error: controller entered ERROR";
    if (recorder) std::cerr << " (session recorded to " << o.record << ")";
    std::cerr << std::endl;
    return kRuntime;
  }
  const auto& a = t.last()->actual.position_mm;
  std::cout << "final pose " << a.x() << " " << a.y() << " " << a.z() << " mm" << std::endl;
  return kOk;
}

// ---------------------------------------------------------------- fault / replay

int cmd_fault(int code, const std::string& host, std::uint16_t port) {
  monitor::MonitorClient client(host, port);
  const auto r = client.post("/fault/" + std::to_string(code));
  if (r.status == 400) {
    std::cerr << "error: " << code << " is not a known fault code" << std::endl;
    return kUsage;
  }
  if (r.status != 202) {
    std::cerr << "error: service answered " << r.status << ": " << r.body << std::endl;
    return kRuntime;
  }
  const json state = json::parse(client.get("/rw/panel/ctrl-state").body);
  const auto known = known_code(code);
  std::cout << "injected " << title(*known) << " (" << code << "); ctrl-state " << state.at("state").get<std::string>()
            << std::endl;
  return kOk;
}

int cmd_replay(const std::string& path, double speed, const std::string& host, std::uint16_t port) {
  if (!(speed > 0.0)) throw UsageError("--speed must be > 0");
  const session::SessionFile f = session::load_session(path);
  if (f.warning) std::cerr << "warning: " << *f.warning << std::endl;
  control::CommandClient client(host, port);
  const auto st = session::replay(f, client, speed);
  std::cout << "replayed " << st.sent << " records in " << std::fixed << std::setprecision(3) << st.elapsed_s
            << " s (recorded " << st.original_s << " s, speed " << speed << ")" << std::endl;
  return kOk;
}

// ---------------------------------------------------------------- analyze

int cmd_sus(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open '" + path + "'");
  const auto rs = analysis::parse_sus(in);
  if (rs.empty()) throw UsageError("'" + path + "' has no responses");
  double sum = 0.0;
  for (std::size_t i = 0; i < rs.size(); ++i) {
    const double s = analysis::sus_score(rs[i]);
    sum += s;
    std::cout << "response " << (i + 1) << ": " << s << "\n";
  }
  std::cout << "mean: " << sum / static_cast<double>(rs.size()) << std::endl;
  return kOk;
}

int cmd_compare(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open '" + path + "'");
  const auto g = analysis::parse_summary(in);
  const auto w = analysis::welch_t(g[0].mean, g[0].sd, g[0].n, g[1].mean, g[1].sd, g[1].n);
  const double d = analysis::cohens_d(g[0].mean, g[0].sd, g[1].mean, g[1].sd);
  std::cout << std::fixed << std::setprecision(3) << g[0].label << " vs " << g[1].label << ": t = " << w.t
            << ", df = " << std::setprecision(2) << w.df << ", d = " << d << std::endl;
  return kOk;
}

int cmd_metrics(const std::string& path, double limit_s) {
  const auto f = session::load_session(path);
  if (f.warning) std::cerr << "warning: " << *f.warning << std::endl;
  const auto m = analysis::task_metrics(f.records, limit_s);
  std::cout << "n_max=" << m.n_max << " e_minor=" << m.e_minor << " e_major=" << m.e_major << std::endl;
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Teleoperation cell: controller simulator, monitoring service and tools"};
  app.require_subcommand(1);

  RunOptions run;
  auto* run_cmd = app.add_subcommand("run", "Start the controller simulator, wire endpoint and monitoring service");
  run_cmd->add_option("--config", run.config, "Configuration file")->check(CLI::ExistingFile);
  run_cmd->add_option("--host", run.host, "Address to bind");
  run_cmd->add_option("--wire-port", run.wire_port, "UDP command/feedback port (0 picks a free one)")->check(CLI::Range(0, 65535));
  run_cmd->add_option("--http-port", run.http_port, "HTTP/WebSocket port (0 picks a free one)")->check(CLI::Range(0, 65535));
  run_cmd->add_option("--synth-scene", run.synth_scene, "Synthetic depth camera, e.g. plane:600,box:100:60:180:140:350,noise:5");
  run_cmd->add_option("--seed", run.seed, "Seed for randomized components")->check(CLI::NonNegativeNumber);
  run_cmd->add_option("--duration-s", run.duration_s, "Stop after this many seconds instead of waiting for a signal");

  TeleopOptions tele;
  auto* tele_cmd = app.add_subcommand("teleop", "Stream a waypoint file to the controller");
  tele_cmd->add_option("waypoints", tele.waypoints, "CSV: x,y,z,qw,qx,qy,qz[,gripper[,annotation]]")->required();
  tele_cmd->add_option("--host", tele.host);
  tele_cmd->add_option("--wire-port", tele.wire_port);
  tele_cmd->add_option("--http-port", tele.http_port);
  tele_cmd->add_option("--speed-mm-s", tele.speed_mm_s, "Streaming speed between waypoints");
  tele_cmd->add_option("--tolerance-mm", tele.tolerance_mm, "Distance that counts as reached");
  tele_cmd->add_option("--settle-timeout-s", tele.settle_timeout_s);
  tele_cmd->add_option("--record", tele.record, "Write the session log here");
  tele_cmd->add_flag("--ar", tele.ar_frame, "Waypoints are AR-side poses in meters");
  tele_cmd->add_option("--config", tele.config, "Configuration file (frame permutation, arm model)")->check(CLI::ExistingFile);

  int fault_code = 0;
  std::string host = "127.0.0.1";
  int http_port = monitor::kDefaultHttpPort;
  auto* fault_cmd = app.add_subcommand("fault", "Inject a controller fault");
  fault_cmd->add_option("code", fault_code, "90518, 90515, 50456, 50027 or 50055")->required();
  fault_cmd->add_option("--host", host);
  fault_cmd->add_option("--http-port", http_port)->check(CLI::Range(1, 65535));

  std::string replay_file;
  double speed = 1.0;
  int wire_port = wire::kDefaultPort;
  auto* replay_cmd = app.add_subcommand("replay", "Re-stream a recorded session");
  replay_cmd->add_option("file", replay_file)->required()->check(CLI::ExistingFile);
  replay_cmd->add_option("--speed", speed, "Time scale factor");
  replay_cmd->add_option("--host", host);
  replay_cmd->add_option("--wire-port", wire_port)->check(CLI::Range(1, 65535));

  auto* analyze_cmd = app.add_subcommand("analyze", "Usability and task statistics");
  analyze_cmd->require_subcommand(1);
  std::string analyze_file;
  double limit_s = 180.0;
  auto* sus_cmd = analyze_cmd->add_subcommand("sus", "Score SUS responses");
  sus_cmd->add_option("file", analyze_file)->required();
  auto* compare_cmd = analyze_cmd->add_subcommand("compare", "Welch's t and Cohen's d from label,mean,sd,n lines");
  compare_cmd->add_option("file", analyze_file)->required();
  auto* metrics_cmd = analyze_cmd->add_subcommand("metrics", "Task metrics from an annotated session");
  metrics_cmd->add_option("file", analyze_file)->required();
  metrics_cmd->add_option("--limit-s", limit_s, "Time limit")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kUsage;
  }

  try {
    if (*run_cmd) return cmd_run(run);
    if (*tele_cmd) return cmd_teleop(tele);
    if (*fault_cmd) return cmd_fault(fault_code, host, static_cast<std::uint16_t>(http_port));
    if (*replay_cmd) return cmd_replay(replay_file, speed, host, static_cast<std::uint16_t>(wire_port));
    if (*sus_cmd) return cmd_sus(analyze_file);
    if (*compare_cmd) return cmd_compare(analyze_file);
    if (*metrics_cmd) return cmd_metrics(analyze_file, limit_s);
  } catch (const net::BindError& e) {
    std::cerr << "error: port " << e.port() << " is unavailable: " << e.what() << std::endl;
    return kUsage;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return kUsage;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return kUsage;
  } catch (const UnsupportedSchema& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return kUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return kRuntime;
  }
  return kUsage;
}
