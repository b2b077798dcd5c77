#pragma once

#include "cell/session.hpp"

#include <array>
#include <iosfwd>
#include <string>
#include <vector>

namespace cell::analysis {

using SusResponse = std::array<int, 10>;

/// 0-100. Odd items contribute (r - 1), even items (5 - r), sum times 2.5.
/// Throws std::invalid_argument for an item outside 1-5.
double sus_score(const SusResponse& r);

/// One response per line, ten comma-separated integers. Blank lines and
/// lines starting with '#' are skipped.
std::vector<SusResponse> parse_sus(std::istream& in);

struct GroupStats {
  std::string label;
  double mean = 0.0;
  double sd = 0.0;
  int n = 0;
};

struct WelchResult {
  double t = 0.0;
  double df = 0.0;
};

/// Welch's unequal-variance t with Welch-Satterthwaite degrees of freedom.
WelchResult welch_t(double mean1, double sd1, int n1, double mean2, double sd2, int n2);

/// Effect size with the equal-n pooled deviation sqrt((s1^2 + s2^2) / 2).
double cohens_d(double mean1, double sd1, double mean2, double sd2);

/// "label,mean,sd,n" lines; exactly two groups expected.
std::vector<GroupStats> parse_summary(std::istream& in);

struct TaskMetrics {
  int n_max = 0;
  int e_minor = 0;
  int e_major = 0;

  bool operator==(const TaskMetrics&) const = default;
};

inline constexpr const char* kItemCompleted = "item_completed";
inline constexpr const char* kMinorError = "minor_error";
inline constexpr const char* kMajorError = "major_error";

/// Counts annotations in the first `limit_s` seconds after the earliest record.
/// Records are sorted by time first, so input order does not matter.
TaskMetrics task_metrics(const std::vector<session::SessionRecord>& records, double limit_s);

}  // namespace cell::analysis
