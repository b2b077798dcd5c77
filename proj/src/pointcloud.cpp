#include "cell/pointcloud.hpp"

#include "cell/error.hpp"
#include "cell/pointcloud_kernels.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>

namespace cell::pointcloud {

DepthFrame DepthFrame::blank(int width, int height, Intrinsics k) {
  DepthFrame f;
  f.width = width;
  f.height = height;
  f.intrinsics = k;
  f.depth_mm.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), 0.0f);
  return f;
}

std::size_t DepthFrame::valid_count() const {
  return static_cast<std::size_t>(std::count_if(depth_mm.begin(), depth_mm.end(), [](float z) { return z > 0.0f; }));
}

void PipelineParams::validate() const {
  if (!(z_min_mm >= 0.0f && z_min_mm < z_max_mm)) throw ConfigError("threshold needs 0 <= z_min < z_max");
  if (!(disparity_k > 0.0f)) throw ConfigError("pointcloud.disparity_k must be > 0");
  if (spatial.magnitude < 1) throw ConfigError("spatial magnitude must be >= 1");
  if (!(spatial.alpha > 0.0f && spatial.alpha <= 1.0f)) throw ConfigError("spatial alpha must be in (0, 1]");
  if (!(spatial.delta > 0.0f)) throw ConfigError("spatial delta must be > 0");
  if (!(temporal.alpha > 0.0f && temporal.alpha <= 1.0f)) throw ConfigError("temporal alpha must be in (0, 1]");
  if (!(temporal.delta > 0.0f)) throw ConfigError("temporal delta must be > 0");
  if (temporal.persistence < 0) throw ConfigError("temporal persistence must be >= 0");
}

DepthFrame threshold_filter(const DepthFrame& frame, float z_min_mm, float z_max_mm) {
  DepthFrame out = frame;
  for (float& z : out.depth_mm) {
    if (z < z_min_mm || z > z_max_mm) z = 0.0f;
  }
  return out;
}

DisparityFrame to_disparity(const DepthFrame& frame, float k) {
  DisparityFrame d;
  d.width = frame.width;
  d.height = frame.height;
  d.intrinsics = frame.intrinsics;
  d.frame_index = frame.frame_index;
  d.disparity.resize(frame.depth_mm.size());
  std::transform(frame.depth_mm.begin(), frame.depth_mm.end(), d.disparity.begin(),
                 [k](float z) { return z > 0.0f ? k / z : 0.0f; });
  return d;
}

DepthFrame from_disparity(const DisparityFrame& frame, float k) {
  DepthFrame z;
  z.width = frame.width;
  z.height = frame.height;
  z.intrinsics = frame.intrinsics;
  z.frame_index = frame.frame_index;
  z.depth_mm.resize(frame.disparity.size());
  std::transform(frame.disparity.begin(), frame.disparity.end(), z.depth_mm.begin(),
                 [k](float d) { return d > 0.0f ? k / d : 0.0f; });
  return z;
}

DisparityFrame spatial_filter(const DisparityFrame& disp, const SpatialParams& p) {
  DisparityFrame out = disp;
  kernels::spatial_filter(out.disparity, out.width, out.height, p);
  return out;
}

void TemporalFilter::reset() {
  width_ = height_ = 0;
  history_.clear();
  invalid_run_.clear();
}

DisparityFrame TemporalFilter::apply(const DisparityFrame& disp) {
  if (disp.width != width_ || disp.height != height_ || history_.size() != disp.disparity.size()) {
    width_ = disp.width;
    height_ = disp.height;
    history_.assign(disp.disparity.size(), 0.0f);
    invalid_run_.assign(disp.disparity.size(), UINT16_MAX);
  }
  DisparityFrame out = disp;
  kernels::temporal_update(disp.disparity, history_, invalid_run_, out.disparity, p_);
  return out;
}

PointCloud deproject(const DepthFrame& frame) {
  PointCloud cloud;
  cloud.frame_index = frame.frame_index;
  cloud.points.reserve(frame.valid_count());
  const auto& k = frame.intrinsics;
  for (int v = 0; v < frame.height; ++v) {
    for (int u = 0; u < frame.width; ++u) {
      const double z = frame.at(u, v);
      if (!(z > 0.0)) continue;
      cloud.points.push_back({static_cast<float>((u - k.cx) * z / k.fx), static_cast<float>((v - k.cy) * z / k.fy),
                              static_cast<float>(z)});
    }
  }
  return cloud;
}

Pipeline::Pipeline(PipelineParams p) : p_(p), temporal_(p.temporal) { p_.validate(); }

DepthFrame Pipeline::filter(const DepthFrame& frame) {
  const DepthFrame gated = threshold_filter(frame, p_.z_min_mm, p_.z_max_mm);
  DisparityFrame disp = spatial_filter(to_disparity(gated, p_.disparity_k), p_.spatial);
  return from_disparity(temporal_.apply(disp), p_.disparity_k);
}

PointCloud decimate(const PointCloud& cloud, std::size_t max_points) {
  if (cloud.points.size() <= max_points) return cloud;
  PointCloud out;
  out.frame_index = cloud.frame_index;
  if (max_points == 0) return out;
  const std::size_t stride = (cloud.points.size() + max_points - 1) / max_points;
  out.points.reserve(max_points);
  for (std::size_t i = 0; i < cloud.points.size(); i += stride) out.points.push_back(cloud.points[i]);
  return out;
}

namespace {

template <typename T>
void put_le(std::vector<std::uint8_t>& buf, T v) {
  for (std::size_t i = 0; i < sizeof(T); ++i) buf.push_back(static_cast<std::uint8_t>(static_cast<std::uint64_t>(v) >> (8 * i)));
}

template <typename T>
T get_le(const std::uint8_t* p) {
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return static_cast<T>(v);
}

void write_bytes(std::ostream& out, const std::vector<std::uint8_t>& buf) {
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
}

constexpr char kFrameMagic[4] = {'D', 'F', 'R', 'M'};
constexpr std::uint16_t kFrameVersion = 1;
constexpr std::size_t kFrameHeader = 4 + 2 + 4 + 4 + 4 * 8 + 8;

}  // namespace

std::vector<std::uint8_t> encode_stream_frame(const PointCloud& cloud) {
  std::vector<std::uint8_t> buf;
  buf.reserve(4 + cloud.points.size() * 12);
  put_le(buf, static_cast<std::uint32_t>(cloud.points.size()));
  for (const auto& p : cloud.points) {
    put_le(buf, std::bit_cast<std::uint32_t>(p.x));
    put_le(buf, std::bit_cast<std::uint32_t>(p.y));
    put_le(buf, std::bit_cast<std::uint32_t>(p.z));
  }
  return buf;
}

bool decode_stream_frame(std::span<const std::uint8_t> bytes, PointCloud& out) {
  if (bytes.size() < 4) return false;
  const auto count = get_le<std::uint32_t>(bytes.data());
  if (bytes.size() != 4 + static_cast<std::size_t>(count) * 12) return false;
  out.points.resize(count);
  const std::uint8_t* p = bytes.data() + 4;
  for (auto& pt : out.points) {
    pt.x = std::bit_cast<float>(get_le<std::uint32_t>(p));
    pt.y = std::bit_cast<float>(get_le<std::uint32_t>(p + 4));
    pt.z = std::bit_cast<float>(get_le<std::uint32_t>(p + 8));
    p += 12;
  }
  return true;
}

void write_frame(std::ostream& out, const DepthFrame& frame) {
  std::vector<std::uint8_t> buf;
  buf.reserve(kFrameHeader + frame.size() * 2);
  buf.insert(buf.end(), std::begin(kFrameMagic), std::end(kFrameMagic));
  put_le(buf, kFrameVersion);
  put_le(buf, static_cast<std::uint32_t>(frame.width));
  put_le(buf, static_cast<std::uint32_t>(frame.height));
  for (double v : {frame.intrinsics.fx, frame.intrinsics.fy, frame.intrinsics.cx, frame.intrinsics.cy}) {
    put_le(buf, std::bit_cast<std::uint64_t>(v));
  }
  put_le(buf, frame.frame_index);
  for (float z : frame.depth_mm) {
    const float r = std::round(std::clamp(z, 0.0f, 65535.0f));
    put_le(buf, static_cast<std::uint16_t>(r));
  }
  write_bytes(out, buf);
}

DepthFrame read_frame(std::istream& in) {
  std::uint8_t head[kFrameHeader];
  if (!in.read(reinterpret_cast<char*>(head), kFrameHeader)) throw Error("depth frame: short header");
  if (!std::equal(std::begin(kFrameMagic), std::end(kFrameMagic), head)) throw Error("depth frame: bad magic");
  if (get_le<std::uint16_t>(head + 4) != kFrameVersion) throw Error("depth frame: unsupported version");
  DepthFrame f;
  f.width = static_cast<int>(get_le<std::uint32_t>(head + 6));
  f.height = static_cast<int>(get_le<std::uint32_t>(head + 10));
  if (f.width <= 0 || f.height <= 0 || f.width > 16384 || f.height > 16384) throw Error("depth frame: bad dimensions");
  f.intrinsics.fx = std::bit_cast<double>(get_le<std::uint64_t>(head + 14));
  f.intrinsics.fy = std::bit_cast<double>(get_le<std::uint64_t>(head + 22));
  f.intrinsics.cx = std::bit_cast<double>(get_le<std::uint64_t>(head + 30));
  f.intrinsics.cy = std::bit_cast<double>(get_le<std::uint64_t>(head + 38));
  f.frame_index = get_le<std::uint64_t>(head + 46);
  const std::size_t n = static_cast<std::size_t>(f.width) * static_cast<std::size_t>(f.height);
  std::vector<std::uint8_t> raw(n * 2);
  if (!in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()))) {
    throw Error("depth frame: short payload");
  }
  f.depth_mm.resize(n);
  for (std::size_t i = 0; i < n; ++i) f.depth_mm[i] = static_cast<float>(get_le<std::uint16_t>(raw.data() + 2 * i));
  return f;
}

SceneSpec SceneSpec::parse(const std::string& text) {
  SceneSpec s;
  std::istringstream items(text);
  std::string item;
  auto bad = [&](const std::string& why) { return ConfigError("scene '" + text + "': " + why); };
  while (std::getline(items, item, ',')) {
    std::vector<std::string> f;
    std::istringstream parts(item);
    for (std::string tok; std::getline(parts, tok, ':');) f.push_back(tok);
    if (f.empty()) continue;
    try {
      if (f[0] == "plane" && f.size() == 2) {
        s.plane_depth_mm = std::stof(f[1]);
      } else if (f[0] == "box" && f.size() == 6) {
        s.boxes.push_back({std::stoi(f[1]), std::stoi(f[2]), std::stoi(f[3]), std::stoi(f[4]), std::stof(f[5])});
      } else if (f[0] == "noise" && f.size() == 2) {
        s.noise_sigma_mm = std::stof(f[1]);
      } else if (f[0] == "dropout" && f.size() == 2) {
        s.dropout = std::stod(f[1]);
      } else if (f[0] == "seed" && f.size() == 2) {
        s.seed = std::stoull(f[1]);
      } else if (f[0] == "size" && f.size() == 2) {
        const auto x = f[1].find('x');
        if (x == std::string::npos) throw bad("size needs WxH");
        s.width = std::stoi(f[1].substr(0, x));
        s.height = std::stoi(f[1].substr(x + 1));
        s.intrinsics.cx = (s.width - 1) / 2.0;
        s.intrinsics.cy = (s.height - 1) / 2.0;
      } else {
        throw bad("unknown item '" + item + "'");
      }
    } catch (const std::logic_error&) {
      throw bad("bad number in '" + item + "'");
    }
  }
  if (s.width <= 0 || s.height <= 0) throw bad("empty image");
  if (!(s.plane_depth_mm >= 0.0f)) throw bad("plane depth must be >= 0");
  if (!(s.dropout >= 0.0 && s.dropout <= 1.0)) throw bad("dropout must be in [0, 1]");
  if (!(s.noise_sigma_mm >= 0.0f)) throw bad("noise must be >= 0");
  return s;
}

float SyntheticScene::truth(int u, int v) const {
  float z = spec_.plane_depth_mm;
  for (const auto& b : spec_.boxes) {
    if (u >= b.u0 && u < b.u1 && v >= b.v0 && v < b.v1) z = b.depth_mm;
  }
  return z;
}

DepthFrame SyntheticScene::frame(std::uint64_t index) const {
  DepthFrame f = DepthFrame::blank(spec_.width, spec_.height, spec_.intrinsics);
  f.frame_index = index;
  std::mt19937_64 rng(spec_.seed * 0x9E3779B97F4A7C15ULL + index);
  std::normal_distribution<float> noise(0.0f, 1.0f);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  for (int v = 0; v < spec_.height; ++v) {
    for (int u = 0; u < spec_.width; ++u) {
      float z = truth(u, v);
      if (spec_.noise_sigma_mm > 0.0f) z += spec_.noise_sigma_mm * noise(rng);
      if (spec_.dropout > 0.0 && coin(rng) < spec_.dropout) z = 0.0f;
      f.at(u, v) = std::max(z, 0.0f);
    }
  }
  return f;
}

}  // namespace cell::pointcloud
