#include "cell/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <sstream>
#include <stdexcept>

namespace cell::analysis {

double sus_score(const SusResponse& r) {
  int sum = 0;
  for (std::size_t i = 0; i < r.size(); ++i) {
    if (r[i] < 1 || r[i] > 5) throw std::invalid_argument("SUS items must be 1-5");
    // Item numbering is 1-based: index 0 is item 1 (odd).
    sum += i % 2 == 0 ? r[i] - 1 : 5 - r[i];
  }
  return 2.5 * sum;
}

std::vector<SusResponse> parse_sus(std::istream& in) {
  std::vector<SusResponse> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos || line[line.find_first_not_of(" \t")] == '#') continue;
    std::istringstream ls(line);
    std::string tok;
    SusResponse r{};
    std::size_t k = 0;
    while (std::getline(ls, tok, ',')) {
      if (k == r.size()) throw std::invalid_argument("line " + std::to_string(lineno) + ": more than 10 items");
      std::size_t used = 0;
      int v = 0;
      try {
        v = std::stoi(tok, &used);
      } catch (const std::logic_error&) {
        throw std::invalid_argument("line " + std::to_string(lineno) + ": '" + tok + "' is not an integer");
      }
      if (tok.find_first_not_of(" \t\r", used) != std::string::npos) {
        throw std::invalid_argument("line " + std::to_string(lineno) + ": '" + tok + "' is not an integer");
      }
      if (v < 1 || v > 5) throw std::invalid_argument("line " + std::to_string(lineno) + ": item out of range 1-5");
      r[k++] = v;
    }
    if (k != r.size()) throw std::invalid_argument("line " + std::to_string(lineno) + ": expected 10 items");
    out.push_back(r);
  }
  return out;
}

WelchResult welch_t(double mean1, double sd1, int n1, double mean2, double sd2, int n2) {
  if (n1 < 2 || n2 < 2) throw std::invalid_argument("Welch's t needs n >= 2 per group");
  if (!(sd1 > 0.0 && sd2 > 0.0)) throw std::invalid_argument("Welch's t needs positive standard deviations");
  const double v1 = sd1 * sd1 / n1;
  const double v2 = sd2 * sd2 / n2;
  WelchResult r;
  r.t = (mean1 - mean2) / std::sqrt(v1 + v2);
  r.df = (v1 + v2) * (v1 + v2) / (v1 * v1 / (n1 - 1) + v2 * v2 / (n2 - 1));
  return r;
}

double cohens_d(double mean1, double sd1, double mean2, double sd2) {
  if (!(sd1 > 0.0 && sd2 > 0.0)) throw std::invalid_argument("Cohen's d needs positive standard deviations");
  return (mean1 - mean2) / std::sqrt((sd1 * sd1 + sd2 * sd2) / 2.0);
}

std::vector<GroupStats> parse_summary(std::istream& in) {
  std::vector<GroupStats> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos || line[line.find_first_not_of(" \t")] == '#') continue;
    std::istringstream ls(line);
    GroupStats g;
    std::string mean, sd, n;
    if (!std::getline(ls, g.label, ',') || !std::getline(ls, mean, ',') || !std::getline(ls, sd, ',') ||
        !std::getline(ls, n)) {
      throw std::invalid_argument("summary lines are label,mean,sd,n");
    }
    try {
      g.mean = std::stod(mean);
      g.sd = std::stod(sd);
      g.n = std::stoi(n);
    } catch (const std::logic_error&) {
      throw std::invalid_argument("bad number in summary line '" + line + "'");
    }
    out.push_back(g);
  }
  if (out.size() != 2) throw std::invalid_argument("summary needs exactly two groups");
  return out;
}

TaskMetrics task_metrics(const std::vector<session::SessionRecord>& records, double limit_s) {
  TaskMetrics m;
  if (records.empty()) return m;
  std::vector<const session::SessionRecord*> sorted;
  sorted.reserve(records.size());
  for (const auto& r : records) sorted.push_back(&r);
  std::stable_sort(sorted.begin(), sorted.end(), [](auto* a, auto* b) { return a->t_us < b->t_us; });
  const std::uint64_t t0 = sorted.front()->t_us;
  for (const auto* r : sorted) {
    if (!r->annotation) continue;
    const double t = static_cast<double>(r->t_us - t0) * 1e-6;
    if (t > limit_s) continue;
    if (*r->annotation == kItemCompleted) {
      ++m.n_max;
    } else if (*r->annotation == kMinorError) {
      ++m.e_minor;
    } else if (*r->annotation == kMajorError) {
      ++m.e_major;
    }
  }
  return m;
}

}  // namespace cell::analysis
