// Copyright (c) 2026 deflow-cpp contributors
// SPDX-License-Identifier: Apache-2.0

#include "deflow/harness/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "deflow/error.hpp"
#include "deflow/rng.hpp"

namespace deflow {

namespace {

double nearest_rank(const std::vector<double>& sorted, double q) {
  const size_t n = sorted.size();
  const size_t idx = std::min(n - 1, static_cast<size_t>(std::ceil(q * n)) - (q > 0.0 ? 1 : 0));
  return sorted[idx];
}

}  // namespace

long peak_rss_kb() {
  std::ifstream status("/proc/self/status");
  std::string line;
  while (std::getline(status, line)) {
    if (line.rfind("VmHWM:", 0) == 0) {
      long kb = 0;
      std::istringstream(line.substr(6)) >> kb;
      return kb;
    }
  }
  return 0;
}

BenchReport bench_voxelizer(int n_points, const GridConfig& grid, int repeats, uint64_t seed) {
  grid.validate();
  if (n_points < 1) throw ValidationError("bench: n_points must be >= 1");
  if (repeats < 1) throw ValidationError("bench: repeats must be >= 1");

  Rng rng(seed);
  MatrixX3<double> points(n_points, 3);
  for (int i = 0; i < n_points; ++i) {
    // Slight overshoot past the ROI so the out-of-range path gets timed too.
    points(i, 0) = grid.origin.x() + rng.uniform(-0.05, 1.05) * grid.extent_x;
    points(i, 1) = grid.origin.y() + rng.uniform(-0.05, 1.05) * grid.extent_y;
    points(i, 2) = rng.uniform(grid.z_min - 0.5, grid.z_max + 0.5);
  }

  BenchReport report;
  report.n_points = n_points;
  report.repeats = repeats;
  report.samples_ms.reserve(static_cast<size_t>(repeats));
  volatile double sink = 0.0;  // keeps the timed work observable
  for (int r = 0; r < repeats; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    const PillarAssignment assignment = assign_pillars(points, grid);
    const MatrixX<double> features = compute_point_features(points, assignment);
    const PseudoImage<float> image =
        scatter_max<float>(features.cast<float>(), assignment, grid);
    sink = sink + static_cast<double>(image.features.data.sum());
    const auto t1 = std::chrono::steady_clock::now();
    report.samples_ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  (void)sink;

  std::vector<double> sorted = report.samples_ms;
  std::sort(sorted.begin(), sorted.end());
  report.median_ms = nearest_rank(sorted, 0.5);
  report.p95_ms = nearest_rank(sorted, 0.95);
  report.median_points_per_s = n_points / (report.median_ms / 1000.0);
  report.p95_points_per_s = n_points / (report.p95_ms / 1000.0);
  report.peak_rss_kb = peak_rss_kb();
  return report;
}

std::string format_bench_report(const BenchReport& r) {
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "voxelizer: %d points, %d repeats\n"
                "  median  %10.3f ms  (%.3e points/s)\n"
                "  p95     %10.3f ms  (%.3e points/s)\n"
                "  peak RSS %ld kB\n",
                r.n_points, r.repeats, r.median_ms, r.median_points_per_s, r.p95_ms,
                r.p95_points_per_s, r.peak_rss_kb);
  return buf;
}

}  // namespace deflow
