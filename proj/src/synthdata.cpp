// Copyright (c) 2026 deflow-cpp contributors
// SPDX-License-Identifier: Apache-2.0

#include "deflow/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "deflow/error.hpp"

namespace deflow {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Mover box dimension ranges (m): roughly car-to-cart sized.
constexpr double kMoverLen[2] = {1.0, 3.0};
constexpr double kMoverWid[2] = {0.8, 2.0};
constexpr double kMoverHgt[2] = {0.8, 1.8};

struct Face {
  int axis;       // fixed axis 0..2
  double sign;    // -1 or +1
  int ua, va;     // the two free axes
  double su, sv;  // free-axis extents
  double area() const { return su * sv; }
};

std::array<Face, 6> box_faces(const Box& box) {
  std::array<Face, 6> faces;
  int k = 0;
  for (int axis = 0; axis < 3; ++axis) {
    const int ua = (axis + 1) % 3;
    const int va = (axis + 2) % 3;
    for (double sign : {-1.0, 1.0}) {
      faces[k++] = {axis, sign, ua, va, box.size[ua], box.size[va]};
    }
  }
  return faces;
}

Vector3<double> face_point(const Box& box, const Face& f, double u, double v) {
  Vector3<double> p = box.center;
  p[f.axis] += f.sign * box.size[f.axis] / 2.0;
  p[f.ua] += u - f.su / 2.0;
  p[f.va] += v - f.sv / 2.0;
  return p;
}

}  // namespace

// Bucket mode reallocates this same budget; see plan_movers.
int SceneConfig::total_points() const { return n_background + n_movers * points_per_mover; }

void SceneConfig::validate() const {
  if (n_background < 0) throw ValidationError("scene: n_background must be >= 0");
  if (n_movers < 0) throw ValidationError("scene: n_movers must be >= 0");
  if (points_per_mover < 0) throw ValidationError("scene: points_per_mover must be >= 0");
  if (slow_fraction < 0.0 || slow_fraction > 1.0)
    throw ValidationError("scene: slow_fraction must be in [0, 1]");
  if (speed_slow_lo < 0.0 || speed_slow_hi < speed_slow_lo || speed_fast_lo < 0.0 ||
      speed_fast_hi < speed_fast_lo)
    throw ValidationError("scene: speed ranges must be ordered and non-negative");
  if (ego_translation_max < 0.0 || ego_yaw_max < 0.0)
    throw ValidationError("scene: ego motion bounds must be >= 0");
  if (extent <= 0.0) throw ValidationError("scene: extent must be positive");
  if (dt <= 0.0) throw ValidationError("scene: dt must be positive");
  if (target_buckets) {
    double sum = 0.0;
    for (double f : bucket_fractions) {
      if (f < 0.0) throw ValidationError("scene: bucket fractions must be >= 0");
      sum += f;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw ValidationError("scene: bucket fractions must sum to 1");
  }
  const bool has_movers = target_buckets ? (bucket_fractions[1] + bucket_fractions[2] > 0.0) : n_movers > 0;
  if (has_movers) {
    const double top_speed = target_buckets ? 3.0 : speed_fast_hi;
    const double required = kMoverLen[1] + 2.0 * top_speed * dt + 2.0;
    if (extent < required)
      throw ValidationError("scene: extent too small for movers (need >= " + std::to_string(required) + " m)");
  }
}

MatrixX3<double> sample_box_surface(const Box& box, int count, Rng& rng) {
  if (count < 0) throw ValidationError("sample_box_surface: count must be >= 0");
  for (int a = 0; a < 3; ++a) {
    if (box.size[a] <= 0.0) throw ValidationError("sample_box_surface: box sides must be positive");
  }
  MatrixX3<double> out(count, 3);
  if (count == 0) return out;

  const auto faces = box_faces(box);
  double area = 0.0;
  for (const auto& f : faces) area += f.area();

  // Deterministic grid first, never exceeding the budget. A count below six
  // cannot give every face a point, so it is pure top-up.
  int written = 0;
  if (count >= 6) {
    double h = std::sqrt(area / count);
    std::array<int, 6> nu{}, nv{};
    for (int iter = 0; iter < 200; ++iter) {
      long total = 0;
      for (int k = 0; k < 6; ++k) {
        nu[k] = static_cast<int>(std::ceil(faces[k].su / h));
        nv[k] = static_cast<int>(std::ceil(faces[k].sv / h));
        total += static_cast<long>(nu[k]) * nv[k];
      }
      if (total <= count) break;
      h *= 1.1;
    }
    for (int k = 0; k < 6; ++k) {
      const Face& f = faces[k];
      for (int i = 0; i < nu[k]; ++i) {
        for (int j = 0; j < nv[k]; ++j) {
          const double u = (i + 0.5) * f.su / nu[k];
          const double v = (j + 0.5) * f.sv / nv[k];
          out.row(written++) = face_point(box, f, u, v).transpose();
        }
      }
    }
  }

  for (; written < count; ++written) {
    double pick = rng.uniform(0.0, area);
    int k = 0;
    for (; k < 5; ++k) {
      if (pick < faces[k].area()) break;
      pick -= faces[k].area();
    }
    const Face& f = faces[k];
    const double u = rng.uniform(0.0, f.su);
    const double v = rng.uniform(0.0, f.sv);
    out.row(written) = face_point(box, f, u, v).transpose();
  }
  return out;
}

namespace {

struct Mover {
  Box box;
  Vector3<double> velocity = Vector3<double>::Zero();
  int count = 0;
};

std::vector<Box> make_static_structures(const SceneConfig& cfg, Rng& rng) {
  std::vector<Box> out;
  const double e = cfg.extent;
  const double wall_off = e / 2.0 - 0.5;
  const double wall_len = std::max(e - 1.0, 0.5);
  out.push_back({{-wall_off, 0.0, 0.5}, {0.2, wall_len, 4.0}});
  out.push_back({{+wall_off, 0.0, 0.5}, {0.2, wall_len, 4.0}});
  out.push_back({{0.0, -wall_off, 0.5}, {wall_len, 0.2, 4.0}});
  out.push_back({{0.0, +wall_off, 0.5}, {wall_len, 0.2, 4.0}});
  const double margin = std::min(1.5, e / 4.0);
  for (int i = 0; i < 3; ++i) {
    Box b;
    b.size = {rng.uniform(0.6, 2.4), rng.uniform(0.6, 2.4), rng.uniform(0.6, 2.0)};
    b.center = {rng.uniform(-e / 2.0 + margin, e / 2.0 - margin),
                rng.uniform(-e / 2.0 + margin, e / 2.0 - margin), rng.uniform(-0.5, 1.0)};
    out.push_back(b);
  }
  return out;
}

// Largest-remainder allocation of n points proportional to structure areas.
std::vector<int> allocate_by_area(const std::vector<Box>& boxes, int n) {
  const size_t k = boxes.size();
  std::vector<double> area(k);
  double total = 0.0;
  for (size_t i = 0; i < k; ++i) {
    const auto faces = box_faces(boxes[i]);
    area[i] = 0.0;
    for (const auto& f : faces) area[i] += f.area();
    total += area[i];
  }
  std::vector<int> counts(k, 0);
  std::vector<std::pair<double, size_t>> rema(k);
  int assigned = 0;
  for (size_t i = 0; i < k; ++i) {
    const double share = total > 0.0 ? area[i] / total * n : 0.0;
    counts[i] = static_cast<int>(std::floor(share));
    assigned += counts[i];
    rema[i] = {share - counts[i], i};
  }
  std::stable_sort(rema.begin(), rema.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (int r = 0; r < n - assigned; ++r) counts[rema[r % k].second] += 1;
  return counts;
}

double draw_speed(const SceneConfig& cfg, Rng& rng) {
  if (rng.uniform() < cfg.slow_fraction) return rng.uniform(cfg.speed_slow_lo, cfg.speed_slow_hi);
  return rng.uniform(cfg.speed_fast_lo, cfg.speed_fast_hi);
}

Mover make_mover(const SceneConfig& cfg, double speed, int count, Rng& rng) {
  Mover m;
  m.count = count;
  m.box.size = {rng.uniform(kMoverLen[0], kMoverLen[1]), rng.uniform(kMoverWid[0], kMoverWid[1]),
                rng.uniform(kMoverHgt[0], kMoverHgt[1])};
  const double theta = rng.uniform(0.0, 2.0 * kPi);
  m.velocity = {speed * std::cos(theta), speed * std::sin(theta), 0.0};
  const double mx = m.box.size[0] / 2.0 + std::abs(m.velocity[0]) * cfg.dt + 0.3;
  const double my = m.box.size[1] / 2.0 + std::abs(m.velocity[1]) * cfg.dt + 0.3;
  m.box.center = {rng.uniform(-cfg.extent / 2.0 + mx, cfg.extent / 2.0 - mx),
                  rng.uniform(-cfg.extent / 2.0 + my, cfg.extent / 2.0 - my),
                  rng.uniform(-0.6, 1.2)};
  return m;
}

std::vector<Mover> plan_movers(const SceneConfig& cfg, int* n_background, Rng& rng) {
  std::vector<Mover> movers;
  if (!cfg.target_buckets) {
    *n_background = cfg.n_background;
    for (int j = 0; j < cfg.n_movers; ++j) {
      movers.push_back(make_mover(cfg, draw_speed(cfg, rng), cfg.points_per_mover, rng));
    }
    return movers;
  }

  // Bucket mode: the total budget is split so speed buckets hold the target
  // fractions exactly (up to integer rounding). Bucket 0 is served by static
  // background, buckets 1 and 2 by movers with speeds placed well inside
  // [0.4, 1.0] and above 1.0 so float rounding cannot flip a bucket.
  const int total = cfg.n_background + cfg.n_movers * cfg.points_per_mover;
  const int c1 = static_cast<int>(std::lround(cfg.bucket_fractions[1] * total));
  const int c2 = static_cast<int>(std::lround(cfg.bucket_fractions[2] * total));
  *n_background = total - c1 - c2;
  const int chunk = std::max(cfg.points_per_mover, 1);
  const double ranges[2][2] = {{0.45, 0.95}, {1.1, 3.0}};
  const int wanted[2] = {c1, c2};
  for (int b = 0; b < 2; ++b) {
    int remaining = wanted[b];
    while (remaining > 0) {
      const int take = std::min(chunk, remaining);
      const double speed = rng.uniform(ranges[b][0], ranges[b][1]);
      movers.push_back(make_mover(cfg, speed, take, rng));
      remaining -= take;
    }
  }
  return movers;
}

}  // namespace

FramePair generate_frame_pair(const SceneConfig& config, uint64_t seed) {
  config.validate();
  Rng base(seed);
  Rng rng_ego = base.fork(0);
  Rng rng_scene = base.fork(1);
  Rng rng_t = base.fork(2);
  Rng rng_t1 = base.fork(3);

  const double yaw = rng_ego.uniform(-config.ego_yaw_max, config.ego_yaw_max);
  const double phi = rng_ego.uniform(0.0, 2.0 * kPi);
  const double dist = rng_ego.uniform(0.0, config.ego_translation_max);
  RigidTransform ego = RigidTransform::from_yaw(yaw);
  ego.translation = {dist * std::cos(phi), dist * std::sin(phi), 0.0};

  const std::vector<Box> statics = make_static_structures(config, rng_scene);
  int n_background = 0;
  const std::vector<Mover> movers = plan_movers(config, &n_background, rng_scene);
  const std::vector<int> bg_counts = allocate_by_area(statics, n_background);

  int n_t = n_background;
  for (const auto& m : movers) n_t += m.count;

  // Frame t: sample everything in frame-t coordinates, quantize to float
  // storage, then derive flow from the quantized positions so stored flow and
  // recomputed flow agree bitwise.
  MatrixX3<double> pos_t(n_t, 3);
  Mask fg = Mask::Constant(n_t, false);
  int row = 0;
  for (size_t s = 0; s < statics.size(); ++s) {
    const MatrixX3<double> p = sample_box_surface(statics[s], bg_counts[s], rng_t);
    pos_t.middleRows(row, p.rows()) = p;
    row += static_cast<int>(p.rows());
  }
  std::vector<std::pair<int, int>> mover_rows;  // [start, count) in pos_t
  for (const auto& m : movers) {
    const MatrixX3<double> p = sample_box_surface(m.box, m.count, rng_t);
    pos_t.middleRows(row, p.rows()) = p;
    mover_rows.emplace_back(row, m.count);
    fg.segment(row, m.count).setConstant(true);
    row += m.count;
  }

  const MatrixX3<float> pos_t_f = pos_t.cast<float>();
  const MatrixX3<double> pos_t_q = pos_t_f.cast<double>();

  MatrixX3<double> flow = ego_flow(ego, pos_t_q);
  for (size_t j = 0; j < movers.size(); ++j) {
    const auto [start, count] = mover_rows[j];
    const MatrixX3<double> moved =
        pos_t_q.middleRows(start, count).rowwise() + (movers[j].velocity * config.dt).transpose();
    flow.middleRows(start, count) = apply_transform(ego, moved) - pos_t_q.middleRows(start, count);
  }

  // Frame t+1: independently resampled surfaces at their t+1 poses, expressed
  // in the t+1 sensor frame. No correspondence with frame-t samples.
  MatrixX3<double> pos_t1(n_t, 3);
  row = 0;
  for (size_t s = 0; s < statics.size(); ++s) {
    const MatrixX3<double> p = sample_box_surface(statics[s], bg_counts[s], rng_t1);
    pos_t1.middleRows(row, p.rows()) = apply_transform(ego, p);
    row += static_cast<int>(p.rows());
  }
  for (const auto& m : movers) {
    Box moved = m.box;
    moved.center += m.velocity * config.dt;
    const MatrixX3<double> p = sample_box_surface(moved, m.count, rng_t1);
    pos_t1.middleRows(row, p.rows()) = apply_transform(ego, p);
    row += m.count;
  }

  FramePair pair;
  pair.cloud_t.positions = pos_t_f;
  pair.cloud_t.gt_flow = flow.cast<float>();
  pair.cloud_t.foreground_mask = fg;
  pair.cloud_t1.positions = pos_t1.cast<float>();
  pair.ego = ego;
  pair.validate();
  return pair;
}

std::vector<int64_t> motion_histogram(const std::vector<FramePair>& pairs,
                                      const std::vector<double>& bin_edges) {
  if (bin_edges.size() < 2) throw ValidationError("motion_histogram: need at least two bin edges");
  for (size_t i = 1; i < bin_edges.size(); ++i) {
    if (bin_edges[i] <= bin_edges[i - 1])
      throw ValidationError("motion_histogram: bin edges must be strictly increasing");
  }
  std::vector<int64_t> counts(bin_edges.size() - 1, 0);
  for (const auto& pair : pairs) {
    if (!pair.cloud_t.gt_flow) throw ValidationError("motion_histogram: frame pair lacks gt flow");
    const MatrixX3<double> gt = pair.cloud_t.gt_flow->cast<double>();
    const MatrixX3<double> pos = pair.cloud_t.positions.cast<double>();
    const MatrixX3<double> delta = gt - ego_flow(pair.ego, pos);
    for (Eigen::Index i = 0; i < delta.rows(); ++i) {
      const double d = delta.row(i).norm();
      if (d <= 0.05) continue;
      if (d < bin_edges.front() || d > bin_edges.back())
        throw ValidationError("motion_histogram: dynamic distance outside bin edges");
      size_t b = counts.size() - 1;  // d == last edge lands in the closed last bin
      for (size_t k = 0; k + 1 < bin_edges.size(); ++k) {
        if (d < bin_edges[k + 1]) {
          b = k;
          break;
        }
      }
      counts[b] += 1;
    }
  }
  return counts;
}

}  // namespace deflow
