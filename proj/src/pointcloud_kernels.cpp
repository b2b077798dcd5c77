#include "cell/pointcloud_kernels.hpp"

#include "pointcloud_line.hpp"

namespace cell::pointcloud::kernels {

void spatial_filter(std::span<float> image, int width, int height, const SpatialParams& p) {
  if (width <= 0 || height <= 0) return;
  float* data = image.data();
  for (int it = 0; it < p.magnitude; ++it) {
#pragma omp parallel for schedule(static)
    for (int v = 0; v < height; ++v) {
      detail::row_passes(data + static_cast<std::ptrdiff_t>(v) * width, width, p);
    }
#pragma omp parallel for schedule(static)
    for (int u = 0; u < width; ++u) {
      detail::column_passes(data + u, width, height, p);
    }
  }
}

void temporal_update(std::span<const float> current, std::span<float> history, std::span<std::uint16_t> invalid_run,
                     std::span<float> out, const TemporalParams& p) {
  const auto n = static_cast<std::ptrdiff_t>(current.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(i);
    out[k] = detail::temporal_pixel(current[k], history[k], invalid_run[k], p);
  }
}

namespace serial {

void spatial_filter(std::span<float> image, int width, int height, const SpatialParams& p) {
  if (width <= 0 || height <= 0) return;
  float* data = image.data();
  for (int it = 0; it < p.magnitude; ++it) {
    for (int v = 0; v < height; ++v) detail::row_passes(data + static_cast<std::ptrdiff_t>(v) * width, width, p);
    for (int u = 0; u < width; ++u) detail::column_passes(data + u, width, height, p);
  }
}

void temporal_update(std::span<const float> current, std::span<float> history, std::span<std::uint16_t> invalid_run,
                     std::span<float> out, const TemporalParams& p) {
  for (std::size_t i = 0; i < current.size(); ++i) {
    out[i] = detail::temporal_pixel(current[i], history[i], invalid_run[i], p);
  }
}

}  // namespace serial
}  // namespace cell::pointcloud::kernels
