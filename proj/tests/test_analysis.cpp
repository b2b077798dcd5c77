#include "doctest.h"

#include "cell/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

using namespace cell;
using namespace cell::analysis;

namespace {

session::SessionRecord at(double t_s, const char* tag = nullptr) {
  session::SessionRecord r;
  r.t_us = static_cast<std::uint64_t>(t_s * 1e6);
  if (tag != nullptr) r.annotation = tag;
  return r;
}

}  // namespace

TEST_CASE("SUS scoring") {
  CHECK(sus_score({3, 3, 3, 3, 3, 3, 3, 3, 3, 3}) == 50.0);
  CHECK(sus_score({5, 1, 5, 1, 5, 1, 5, 1, 5, 1}) == 100.0);
  CHECK(sus_score({1, 5, 1, 5, 1, 5, 1, 5, 1, 5}) == 0.0);
  CHECK_THROWS_AS(sus_score({0, 3, 3, 3, 3, 3, 3, 3, 3, 3}), std::invalid_argument);
  CHECK_THROWS_AS(sus_score({3, 3, 3, 3, 3, 3, 3, 3, 3, 6}), std::invalid_argument);
}

TEST_CASE("SUS is monotone in each item") {
  std::mt19937_64 rng(31);
  std::uniform_int_distribution<int> likert(1, 5);
  for (int trial = 0; trial < 500; ++trial) {
    SusResponse r;
    for (int& v : r) v = likert(rng);
    const double base = sus_score(r);
    for (std::size_t i = 0; i < 10; ++i) {
      SusResponse better = r;
      const bool odd_item = i % 2 == 0;  // item 1 is index 0
      if (odd_item && better[i] < 5) ++better[i];
      if (!odd_item && better[i] > 1) --better[i];
      CHECK(sus_score(better) >= base);
    }
  }
}

TEST_CASE("SUS file parsing") {
  std::istringstream in("# header\n3,3,3,3,3,3,3,3,3,3\n\n5,1,5,1,5,1,5,1,5,1\n");
  const auto rs = parse_sus(in);
  REQUIRE(rs.size() == 2);
  CHECK(sus_score(rs[1]) == 100.0);
  std::istringstream short_line("3,3,3\n");
  CHECK_THROWS_AS(parse_sus(short_line), std::invalid_argument);
}

TEST_CASE("Welch t on the published summary statistics") {
  const WelchResult w = welch_t(70.5, 23.14, 5, 63.0, 17.54, 5);
  CHECK(w.t == doctest::Approx(0.578).epsilon(0.001 / 0.578));

  // Welch-Satterthwaite by hand.
  const double a = 23.14 * 23.14 / 5.0, b = 17.54 * 17.54 / 5.0;
  const double df = (a + b) * (a + b) / (a * a / 4.0 + b * b / 4.0);
  CHECK(w.df == doctest::Approx(df).epsilon(1e-12));
  CHECK(std::abs(w.df - 7.46) < 0.01);
  CHECK(w.t == doctest::Approx((70.5 - 63.0) / std::sqrt(a + b)).epsilon(1e-12));
}

TEST_CASE("Welch t symmetry") {
  const WelchResult x = welch_t(70.5, 23.14, 5, 63.0, 17.54, 5);
  const WelchResult y = welch_t(63.0, 17.54, 5, 70.5, 23.14, 5);
  CHECK(x.t == -y.t);
  CHECK(x.df == y.df);
  CHECK(welch_t(10.0, 2.0, 6, 10.0, 3.0, 9).t == 0.0);
  CHECK_THROWS_AS(welch_t(1.0, 1.0, 1, 2.0, 1.0, 5), std::invalid_argument);
  CHECK_THROWS_AS(welch_t(1.0, 0.0, 5, 2.0, 1.0, 5), std::invalid_argument);
}

TEST_CASE("Cohen's d") {
  CHECK(std::abs(cohens_d(70.5, 23.14, 63.0, 17.54) - 0.37) < 0.01);
  CHECK(cohens_d(5.0, 1.0, 5.0, 2.0) == 0.0);
  CHECK(cohens_d(70.5, 23.14, 63.0, 17.54) == -cohens_d(63.0, 17.54, 70.5, 23.14));
}

TEST_CASE("summary file parsing") {
  std::istringstream in("with,70.5,23.14,5\nwithout,63.0,17.54,5\n");
  const auto g = parse_summary(in);
  REQUIRE(g.size() == 2);
  CHECK(g[0].label == "with");
  CHECK(g[1].sd == 17.54);
  std::istringstream one("with,70.5,23.14,5\n");
  CHECK_THROWS_AS(parse_summary(one), std::invalid_argument);
}

TEST_CASE("task metrics") {
  std::vector<session::SessionRecord> log;
  for (int i = 0; i < 9; ++i) log.push_back(at(10.0 + 15.0 * i, kItemCompleted));
  log.push_back(at(50.0, kMinorError));
  for (int i = 0; i < 100; ++i) log.push_back(at(i * 1.7));
  log.push_back(at(200.0, kItemCompleted));
  log.push_back(at(185.0, kMajorError));
  CHECK(task_metrics(log, 180.0) == TaskMetrics{9, 1, 0});
  CHECK(task_metrics(log, 300.0) == TaskMetrics{10, 1, 1});
  CHECK(task_metrics({}, 180.0) == TaskMetrics{});

  std::mt19937_64 rng(32);
  for (int k = 0; k < 20; ++k) {
    std::shuffle(log.begin(), log.end(), rng);
    CHECK(task_metrics(log, 180.0) == TaskMetrics{9, 1, 0});
  }
}
