#pragma once

// Brute-force reference implementations used to check the production kernels.
// Written for clarity over speed: explicit coordinates, fresh buffers.

#include "cell/pointcloud.hpp"

#include <cmath>
#include <vector>

namespace oracle {

struct Image {
  int w = 0, h = 0;
  std::vector<float> px;
  float& at(int x, int y) { return px[static_cast<std::size_t>(y * w + x)]; }
};

// One recursive pass along a line given as explicit (x, y) coordinates.
inline void pass(Image& img, const std::vector<std::pair<int, int>>& line, float alpha, float delta) {
  if (line.size() < 2) return;
  const std::vector<float> input = [&] {
    std::vector<float> v;
    for (auto [x, y] : line) v.push_back(img.at(x, y));
    return v;
  }();
  std::vector<float> out = input;
  for (std::size_t i = 1; i < line.size(); ++i) {
    const float prev = out[i - 1];
    const float cur = input[i];
    if (cur > 0.0f) {
      if (prev > 0.0f && std::fabs(prev - cur) < delta) out[i] = cur + alpha * (prev - cur);
    } else if (i + 1 < line.size()) {
      const float next = input[i + 1];
      if (prev > 0.0f && next > 0.0f && std::fabs(prev - next) < delta) out[i] = prev;
    }
  }
  for (std::size_t i = 0; i < line.size(); ++i) img.at(line[i].first, line[i].second) = out[i];
}

inline void spatial(Image& img, int magnitude, float alpha, float delta) {
  for (int it = 0; it < magnitude; ++it) {
    for (int y = 0; y < img.h; ++y) {
      std::vector<std::pair<int, int>> fwd, back;
      for (int x = 0; x < img.w; ++x) fwd.emplace_back(x, y);
      for (int x = img.w - 1; x >= 0; --x) back.emplace_back(x, y);
      pass(img, fwd, alpha, delta);
      pass(img, back, alpha, delta);
    }
    for (int x = 0; x < img.w; ++x) {
      std::vector<std::pair<int, int>> down, up;
      for (int y = 0; y < img.h; ++y) down.emplace_back(x, y);
      for (int y = img.h - 1; y >= 0; --y) up.emplace_back(x, y);
      pass(img, down, alpha, delta);
      pass(img, up, alpha, delta);
    }
  }
}

// Temporal smoothing state kept as explicit "frames since last valid".
struct Temporal {
  float alpha, delta;
  int persistence;
  std::vector<float> hist;
  std::vector<int> since_valid;

  std::vector<float> apply(const std::vector<float>& cur) {
    if (hist.size() != cur.size()) {
      hist.assign(cur.size(), 0.0f);
      since_valid.assign(cur.size(), 1 << 30);
    }
    std::vector<float> out(cur.size(), 0.0f);
    for (std::size_t i = 0; i < cur.size(); ++i) {
      if (cur[i] > 0.0f) {
        since_valid[i] = 0;
        const bool blend = hist[i] > 0.0f && std::fabs(cur[i] - hist[i]) < delta;
        out[i] = blend ? alpha * cur[i] + (1.0f - alpha) * hist[i] : cur[i];
      } else {
        since_valid[i] = since_valid[i] + 1;
        out[i] = (hist[i] > 0.0f && since_valid[i] <= persistence) ? hist[i] : 0.0f;
      }
      hist[i] = out[i];
    }
    return out;
  }
};

inline double lp_alpha(double fc, double dt) { return dt / (dt + 1.0 / (2.0 * 3.14159265358979323846 * fc)); }

}  // namespace oracle
