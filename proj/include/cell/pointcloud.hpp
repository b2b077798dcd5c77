#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace cell::pointcloud {

struct Intrinsics {
  double fx = 300.0;
  double fy = 300.0;
  double cx = 159.5;
  double cy = 119.5;
};

/// Row-major depth image in millimeters; 0 marks an invalid pixel.
struct DepthFrame {
  int width = 0;
  int height = 0;
  std::vector<float> depth_mm;
  Intrinsics intrinsics;
  std::uint64_t frame_index = 0;

  static DepthFrame blank(int width, int height, Intrinsics k = {});
  std::size_t size() const { return depth_mm.size(); }
  float at(int u, int v) const { return depth_mm[static_cast<std::size_t>(v) * static_cast<std::size_t>(width) + static_cast<std::size_t>(u)]; }
  float& at(int u, int v) { return depth_mm[static_cast<std::size_t>(v) * static_cast<std::size_t>(width) + static_cast<std::size_t>(u)]; }
  std::size_t valid_count() const;
};

/// Same layout as DepthFrame, holding d = K / z; 0 marks invalid.
struct DisparityFrame {
  int width = 0;
  int height = 0;
  std::vector<float> disparity;
  Intrinsics intrinsics;
  std::uint64_t frame_index = 0;
};

struct SpatialParams {
  int magnitude = 2;
  float alpha = 0.5f;
  float delta = 20.0f;
};

struct TemporalParams {
  float alpha = 0.4f;
  float delta = 20.0f;
  int persistence = 3;
};

struct PipelineParams {
  float z_min_mm = 0.0f;
  float z_max_mm = 1000.0f;
  float disparity_k = 32000.0f;
  SpatialParams spatial;
  TemporalParams temporal;

  /// Throws ConfigError on out-of-range values.
  void validate() const;
};

struct Point {
  float x, y, z;
};

struct PointCloud {
  std::vector<Point> points;
  std::uint64_t frame_index = 0;
};

DepthFrame threshold_filter(const DepthFrame& frame, float z_min_mm, float z_max_mm);
DisparityFrame to_disparity(const DepthFrame& frame, float k);
DepthFrame from_disparity(const DisparityFrame& frame, float k);

/// Edge-preserving recursive smoothing: `magnitude` iterations of four 1-D
/// passes (left->right, right->left, top->bottom, bottom->top). A pass blends
/// a pixel toward its predecessor's output when both are valid and closer
/// than delta, and fills a single-pixel hole whose two neighbours agree.
DisparityFrame spatial_filter(const DisparityFrame& disp, const SpatialParams& p);

/// Per-stream temporal smoothing state. Frames must keep their dimensions;
/// a size change resets the history.
class TemporalFilter {
public:
  explicit TemporalFilter(TemporalParams p = {}) : p_(p) {}

  DisparityFrame apply(const DisparityFrame& disp);
  void reset();

private:
  TemporalParams p_;
  int width_ = 0;
  int height_ = 0;
  std::vector<float> history_;
  std::vector<std::uint16_t> invalid_run_;
};

/// Pinhole deprojection of every valid pixel: x = (u - cx) z / fx, y = (v - cy) z / fy.
PointCloud deproject(const DepthFrame& frame);

/// threshold -> disparity -> spatial -> temporal -> depth, then deprojection.
class Pipeline {
public:
  explicit Pipeline(PipelineParams p = {});

  /// Filtered depth image, before deprojection.
  DepthFrame filter(const DepthFrame& frame);
  PointCloud process(const DepthFrame& frame) { return deproject(filter(frame)); }
  const PipelineParams& params() const { return p_; }

private:
  PipelineParams p_;
  TemporalFilter temporal_;
};

/// Uniform stride subsampling to at most `max_points`.
PointCloud decimate(const PointCloud& cloud, std::size_t max_points);

inline constexpr std::size_t kStreamMaxPoints = 20000;
inline constexpr double kStreamMaxFps = 15.0;

/// Console stream frame: u32 count, then count x (f32 x, f32 y, f32 z) mm, little-endian.
std::vector<std::uint8_t> encode_stream_frame(const PointCloud& cloud);
/// Returns false on a malformed buffer.
bool decode_stream_frame(std::span<const std::uint8_t> bytes, PointCloud& out);

/// Depth frame container, little-endian:
///   "DFRM" | u16 version (1) | u32 width | u32 height | f64 fx, fy, cx, cy |
///   u64 frame_index | width*height x u16 depth mm
void write_frame(std::ostream& out, const DepthFrame& frame);
/// Throws Error on a bad header or short payload.
DepthFrame read_frame(std::istream& in);

struct Box {
  int u0 = 0, v0 = 0, u1 = 0, v1 = 0;  // half-open pixel rectangle
  float depth_mm = 0.0f;
};

struct SceneSpec {
  int width = 320;
  int height = 240;
  Intrinsics intrinsics;
  float plane_depth_mm = 600.0f;
  std::vector<Box> boxes;
  float noise_sigma_mm = 0.0f;
  double dropout = 0.0;
  std::uint64_t seed = 1;

  /// "plane:600[,box:u0:v0:u1:v1:depth][,noise:5][,dropout:0.05][,size:WxH]"
  static SceneSpec parse(const std::string& text);
};

/// Deterministic synthetic depth camera; frame k depends only on (spec, k).
class SyntheticScene {
public:
  explicit SyntheticScene(SceneSpec spec) : spec_(std::move(spec)) {}

  DepthFrame frame(std::uint64_t index) const;
  /// Noise- and dropout-free depth at a pixel.
  float truth(int u, int v) const;
  const SceneSpec& spec() const { return spec_; }

private:
  SceneSpec spec_;
};

}  // namespace cell::pointcloud
