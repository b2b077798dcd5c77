#pragma once

#include "cell/controller.hpp"
#include "cell/frames.hpp"
#include "cell/kinematics.hpp"
#include "cell/pointcloud.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>

namespace cell {

/// Everything `cell run` needs. Loaded from a flat "key = value" file; '#'
/// starts a comment. Unknown keys are rejected.
///
///   frame.permutation              nine signed integers, row-major
///   wire.port                      UDP port (6510)
///   wire.rate_hz                   control/feedback rate (250)
///   wire.hold_timeout_ms           command silence before holding (500)
///   monitor.http_port              HTTP port (8080)
///   kinematics.model               path to an arm model file
///   kinematics.w_min               manipulability floor
///   safety.max_speed_deviation_mm_s, safety.lp_cutoff_hz, safety.max_orient_rate_deg_s
///   pointcloud.disparity_k
struct CellConfig {
  frames::AxisPermutation permutation;
  std::uint16_t wire_port = 6510;
  double rate_hz = 250.0;
  std::uint16_t http_port = 8080;
  kinematics::ArmModel arm = kinematics::ArmModel::default_model();
  control::SafetyConfig safety;
  pointcloud::PipelineParams pipeline;

  /// Applies overrides from `in` on top of the current values. Relative model
  /// paths resolve against `base_dir`. Throws ConfigError.
  void apply(std::istream& in, const std::string& origin = "config", const std::string& base_dir = {});
  void load(const std::string& path);
  void validate() const;
};

}  // namespace cell
