// Copyright (c) 2026 deflow-cpp contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "deflow/frame.hpp"
#include "deflow/geometry.hpp"
#include "deflow/rng.hpp"
#include "deflow/types.hpp"

namespace deflow {

struct Box {
  Vector3<double> center = Vector3<double>::Zero();
  Vector3<double> size = Vector3<double>::Ones();
};

struct SceneConfig {
  int n_background = 4096;
  int n_movers = 4;
  int points_per_mover = 256;

  // Mover speed mixture in m/s. Tuned so the per-frame moving-distance
  // histogram concentrates below 0.2 m at dt = 0.1 s.
  double slow_fraction = 0.7;
  double speed_slow_lo = 0.5, speed_slow_hi = 2.0;
  double speed_fast_lo = 2.0, speed_fast_hi = 15.0;

  double ego_translation_max = 0.5;  // metres over one frame step
  double ego_yaw_max = 0.05;         // radians over one frame step

  double extent = 12.8;  // square scene side length, centred on the origin
  double dt = 0.1;

  // When set, n_movers and n_background are ignored and the generator lays
  // out movers so the three speed buckets (< 0.4, [0.4, 1.0], > 1.0 m/s)
  // hold the given fractions of the total point count.
  bool target_buckets = false;
  std::array<double, 3> bucket_fractions{0.6, 0.2, 0.2};

  uint64_t seed = 0;

  int total_points() const;
  void validate() const;
};

// Exact-count box-surface sampler: a deterministic stratified grid over every
// face, topped up with area-weighted uniform draws. The grid spacing never
// exceeds ~1.3 * sqrt(area / count), which bounds the surface covering radius.
MatrixX3<double> sample_box_surface(const Box& box, int count, Rng& rng);

FramePair generate_frame_pair(const SceneConfig& config, uint64_t seed);

// Histogram of ground-truth moving distance ||F_gt - ego_flow|| over dynamic
// points (distance > 0.05 m). Bins are half-open [e_i, e_{i+1}) with the last
// bin closed; a dynamic point outside the edge range is a validation error,
// so on success the counts sum to the dynamic-point count.
std::vector<int64_t> motion_histogram(const std::vector<FramePair>& pairs,
                                      const std::vector<double>& bin_edges);

}  // namespace deflow
