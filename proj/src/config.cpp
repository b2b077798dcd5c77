#include "cell/config.hpp"

#include "cell/error.hpp"

#include <filesystem>
#include <fstream>
#include <istream>
#include <sstream>
#include <vector>

namespace cell {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double d = 0.0;
  try {
    d = std::stod(v, &used);
  } catch (const std::logic_error&) {
    used = 0;
  }
  if (used == 0 || used != v.size()) throw ConfigError(key + ": '" + v + "' is not a number");
  return d;
}

std::uint16_t to_port(const std::string& key, const std::string& v) {
  const double d = to_double(key, v);
  if (d < 0 || d > 65535 || d != static_cast<double>(static_cast<int>(d))) throw ConfigError(key + ": bad port '" + v + "'");
  return static_cast<std::uint16_t>(d);
}

}  // namespace

void CellConfig::apply(std::istream& in, const std::string& origin, const std::string& base_dir) {
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));

    if (key == "frame.permutation") {
      std::istringstream vs(val);
      std::vector<int> entries;
      for (int x; vs >> x;) entries.push_back(x);
      if (!vs.eof()) throw ConfigError("frame.permutation: expected integers");
      permutation = frames::AxisPermutation::from_row_major(entries);
    } else if (key == "wire.port") {
      wire_port = to_port(key, val);
    } else if (key == "wire.rate_hz") {
      rate_hz = to_double(key, val);
    } else if (key == "wire.hold_timeout_ms") {
      safety.hold_timeout_s = to_double(key, val) / 1000.0;
    } else if (key == "monitor.http_port") {
      http_port = to_port(key, val);
    } else if (key == "kinematics.model") {
      std::filesystem::path model(val);
      if (model.is_relative() && !base_dir.empty()) model = std::filesystem::path(base_dir) / model;
      arm = kinematics::ArmModel::load(model.string());
    } else if (key == "kinematics.w_min") {
      safety.w_min = to_double(key, val);
    } else if (key == "safety.max_speed_deviation_mm_s") {
      safety.max_speed_deviation_mm_s = to_double(key, val);
    } else if (key == "safety.lp_cutoff_hz") {
      safety.lp_cutoff_hz = to_double(key, val);
    } else if (key == "safety.max_orient_rate_deg_s") {
      safety.max_orient_rate_deg_s = to_double(key, val);
    } else if (key == "pointcloud.disparity_k") {
      pipeline.disparity_k = static_cast<float>(to_double(key, val));
    } else {
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": unknown key '" + key + "'");
    }
  }
  validate();
}

void CellConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  apply(in, path, std::filesystem::path(path).parent_path().string());
}

void CellConfig::validate() const {
  if (!(rate_hz > 0.0 && rate_hz <= 2000.0)) throw ConfigError("wire.rate_hz must be in (0, 2000]");
  arm.validate();
  safety.validate();
  pipeline.validate();
}

}  // namespace cell
