// Copyright (c) 2026 deflow-cpp contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "deflow/voxelizer.hpp"

namespace deflow {

struct BenchReport {
  int n_points = 0;
  int repeats = 0;
  double median_ms = 0.0;
  double p95_ms = 0.0;
  double median_points_per_s = 0.0;
  double p95_points_per_s = 0.0;  // throughput at the p95 (slow-tail) time
  long peak_rss_kb = 0;
  std::vector<double> samples_ms;
};

// Times assign + point features + scatter-max over random clouds. Numbers are
// informational; nothing downstream keys off them.
BenchReport bench_voxelizer(int n_points, const GridConfig& grid, int repeats, uint64_t seed = 0);

std::string format_bench_report(const BenchReport& report);

// VmHWM from /proc/self/status; 0 when unavailable.
long peak_rss_kb();

}  // namespace deflow
