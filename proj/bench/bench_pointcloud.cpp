// Serial vs OpenMP pointcloud kernels on synthetic 640x480 frames.
// Usage: bench_pointcloud [iterations]

#include "cell/pointcloud.hpp"
#include "cell/pointcloud_kernels.hpp"

#include <omp.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <vector>

using namespace cell::pointcloud;

namespace {

template <class F>
double median_ms(int iterations, F&& fn) {
  std::vector<double> t;
  for (int i = 0; i < iterations; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    t.push_back(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
  }
  std::sort(t.begin(), t.end());
  return t[t.size() / 2];
}

}  // namespace

int main(int argc, char** argv) {
  const int iterations = argc > 1 ? std::max(1, std::atoi(argv[1])) : 30;
  const SyntheticScene scene(SceneSpec::parse("plane:600,box:200:120:360:280:350,noise:5,dropout:0.05,size:640x480"));
  const DisparityFrame disp = to_disparity(threshold_filter(scene.frame(0), 0.0f, 1000.0f), 32000.0f);
  const std::size_t n = disp.disparity.size();
  const SpatialParams sp;
  const TemporalParams tp;

  std::vector<float> a, b;
  const double sp_serial = median_ms(iterations, [&] {
    a = disp.disparity;
    kernels::serial::spatial_filter(a, disp.width, disp.height, sp);
  });
  const double sp_omp = median_ms(iterations, [&] {
    b = disp.disparity;
    kernels::spatial_filter(b, disp.width, disp.height, sp);
  });
  const bool spatial_same = a == b;

  std::vector<float> hist_s(n, 0.0f), hist_p(n, 0.0f), out_s(n), out_p(n);
  std::vector<std::uint16_t> run_s(n, 0), run_p(n, 0);
  const double tp_serial = median_ms(iterations, [&] { kernels::serial::temporal_update(disp.disparity, hist_s, run_s, out_s, tp); });
  const double tp_omp = median_ms(iterations, [&] { kernels::temporal_update(disp.disparity, hist_p, run_p, out_p, tp); });
  const bool temporal_same = out_s == out_p && hist_s == hist_p;

  std::printf("frame %dx%d, %d iterations, %d OpenMP threads\n", disp.width, disp.height, iterations, omp_get_max_threads());
  std::printf("%-10s %12s %12s %8s %s\n", "kernel", "serial ms", "openmp ms", "speedup", "identical");
  std::printf("%-10s %12.3f %12.3f %8.2f %s\n", "spatial", sp_serial, sp_omp, sp_serial / sp_omp, spatial_same ? "yes" : "NO");
  std::printf("%-10s %12.3f %12.3f %8.2f %s\n", "temporal", tp_serial, tp_omp, tp_serial / tp_omp, temporal_same ? "yes" : "NO");
  return spatial_same && temporal_same ? 0 : 1;
}
