#pragma once

#include "cell/pointcloud.hpp"

#include <cstdint>
#include <span>

// Image kernels behind the pipeline. The default versions are OpenMP-parallel
// over independent rows, columns or pixels; serial:: keeps the single-thread
// reference used by tests and the benchmark. Both produce identical bits.
namespace cell::pointcloud::kernels {

void spatial_filter(std::span<float> image, int width, int height, const SpatialParams& p);

void temporal_update(std::span<const float> current, std::span<float> history, std::span<std::uint16_t> invalid_run,
                     std::span<float> out, const TemporalParams& p);

namespace serial {

void spatial_filter(std::span<float> image, int width, int height, const SpatialParams& p);

void temporal_update(std::span<const float> current, std::span<float> history, std::span<std::uint16_t> invalid_run,
                     std::span<float> out, const TemporalParams& p);

}  // namespace serial
}  // namespace cell::pointcloud::kernels
