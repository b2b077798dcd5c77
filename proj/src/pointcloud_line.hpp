#pragma once

#include "cell/pointcloud.hpp"

#include <cmath>
#include <cstddef>
#include <cstdint>

namespace cell::pointcloud::detail {

// One recursive pass over a strided line, first -> last. `step` is +1 or -1
// in element units times the stride.
inline void spatial_pass(float* line, int n, std::ptrdiff_t step, float alpha, float delta) {
  if (n < 2) return;
  float prev = line[0];
  for (int i = 1; i < n; ++i) {
    float* px = line + static_cast<std::ptrdiff_t>(i) * step;
    float cur = *px;
    if (cur > 0.0f) {
      if (prev > 0.0f && std::fabs(prev - cur) < delta) {
        cur = cur + alpha * (prev - cur);
        *px = cur;
      }
    } else if (prev > 0.0f && i + 1 < n) {
      const float next = *(px + step);
      if (next > 0.0f && std::fabs(prev - next) < delta) {
        cur = prev;
        *px = cur;
      }
    }
    prev = cur;
  }
}

inline void row_passes(float* row, int width, const SpatialParams& p) {
  spatial_pass(row, width, 1, p.alpha, p.delta);
  spatial_pass(row + (width - 1), width, -1, p.alpha, p.delta);
}

inline void column_passes(float* col, int width, int height, const SpatialParams& p) {
  const auto stride = static_cast<std::ptrdiff_t>(width);
  spatial_pass(col, height, stride, p.alpha, p.delta);
  spatial_pass(col + (height - 1) * stride, height, -stride, p.alpha, p.delta);
}

inline float temporal_pixel(float cur, float& hist, std::uint16_t& run, const TemporalParams& p) {
  float out;
  if (cur > 0.0f) {
    run = 0;
    if (hist > 0.0f && std::fabs(cur - hist) < p.delta) {
      out = p.alpha * cur + (1.0f - p.alpha) * hist;
    } else {
      out = cur;
    }
  } else {
    if (run < UINT16_MAX) ++run;
    out = (hist > 0.0f && static_cast<int>(run) <= p.persistence) ? hist : 0.0f;
  }
  hist = out;
  return out;
}

}  // namespace cell::pointcloud::detail
