// Copyright (c) 2026 deflow-cpp contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <vector>

#include "deflow/error.hpp"
#include "deflow/types.hpp"

namespace deflow {

// Bird's-eye-view pillar grid. Cells are half-open [lo, hi) in x, y and z:
// a coordinate exactly on the upper ROI edge is out of range, and a tie at an
// interior cell boundary goes to the higher-index cell.
struct GridConfig {
  double extent_x = 102.4;   // meters, side length along x
  double extent_y = 102.4;   // meters, side length along y
  double resolution = 0.2;   // meters per cell
  Eigen::Vector2d origin{-51.2, -51.2};  // world coordinate of the (0,0) cell corner
  double z_min = -3.0;
  double z_max = 3.0;

  int width() const { return dim(extent_x); }    // cells along x
  int height() const { return dim(extent_y); }   // cells along y
  Eigen::Index cell_count() const { return static_cast<Eigen::Index>(width()) * height(); }
  double z_mid() const { return 0.5 * (z_min + z_max); }

  // Center of cell (ix, iy) in world coordinates.
  Eigen::Vector2d cell_center(int ix, int iy) const {
    return {origin.x() + (ix + 0.5) * resolution, origin.y() + (iy + 0.5) * resolution};
  }

  void validate() const {
    if (!(resolution > 0.0) || !(extent_x > 0.0) || !(extent_y > 0.0)) {
      throw ValidationError("grid extents and resolution must be positive");
    }
    check_integer_dim(extent_x, "extent_x");
    check_integer_dim(extent_y, "extent_y");
    if (!(z_min < z_max)) throw ValidationError("grid z crop requires z_min < z_max");
  }

  // 512 x 512 at 0.2 m over a 102.4 m square, centered on the sensor.
  static GridConfig paper_default() { return {}; }

  // 64 x 64 at 0.2 m; small enough to train and test on one CPU.
  static GridConfig desk_default() {
    GridConfig g;
    g.extent_x = g.extent_y = 12.8;
    g.origin = {-6.4, -6.4};
    return g;
  }

 private:
  int dim(double extent) const {
    const double cells = extent / resolution;
    return static_cast<int>(std::llround(cells));
  }

  void check_integer_dim(double extent, const char* name) const {
    const double cells = extent / resolution;
    if (std::abs(cells - std::llround(cells)) > 1e-6) {
      std::ostringstream msg;
      msg << name << " = " << extent << " is not an integer multiple of resolution " << resolution;
      throw ValidationError(msg.str());
    }
  }
};

// Point -> pillar map. Row i always describes input point i; out-of-ROI
// points get pillar_index -1, zero offsets, and valid = false.
struct PillarAssignment {
  Eigen::VectorXi pillar_index;    // row-major cell id iy * W + ix, or -1
  MatrixX3<double> center_offset;  // x, y from pillar center; z from the crop midpoint
  MatrixX3<double> cluster_offset; // offset from the mean of the point's pillar
  Mask valid;

  Eigen::Index size() const { return pillar_index.size(); }
};

// Scattered pillar features. Cells without any point hold exactly the fill
// value (0) and have occupancy false.
template <typename T>
struct PseudoImage {
  GridTensor<T> features;
  Mask occupancy;
};

template <typename T>
struct ScatterMaxResult {
  PseudoImage<T> image;
  // Index of the point that supplied each (cell, channel) maximum, -1 where
  // the cell is empty. Ties resolve to the lowest point index.
  Eigen::MatrixXi argmax;
};

namespace detail {

// Per-pillar member lists in pillar order. Used to accumulate cluster means in
// an input-order-independent sequence: members are sorted by position
// (lexicographic x, y, z) before summing, so a permutation of the input points
// reproduces bitwise-identical offsets.
inline std::vector<std::vector<int>> pillar_members(const Eigen::VectorXi& pillar_index,
                                                    Eigen::Index cell_count) {
  std::vector<std::vector<int>> members(static_cast<size_t>(cell_count));
  for (Eigen::Index i = 0; i < pillar_index.size(); ++i) {
    if (pillar_index[i] >= 0) members[static_cast<size_t>(pillar_index[i])].push_back(static_cast<int>(i));
  }
  return members;
}

}  // namespace detail

inline PillarAssignment assign_pillars(const MatrixX3<double>& points, const GridConfig& grid) {
  grid.validate();
  if (!points.allFinite()) throw ValidationError("assign_pillars: non-finite point coordinates");

  const Eigen::Index n = points.rows();
  const int w = grid.width();
  const int h = grid.height();

  PillarAssignment out;
  out.pillar_index = Eigen::VectorXi::Constant(n, -1);
  out.center_offset = MatrixX3<double>::Zero(n, 3);
  out.cluster_offset = MatrixX3<double>::Zero(n, 3);
  out.valid = Mask::Constant(n, false);

  for (Eigen::Index i = 0; i < n; ++i) {
    const double ux = (points(i, 0) - grid.origin.x()) / grid.resolution;
    const double uy = (points(i, 1) - grid.origin.y()) / grid.resolution;
    const int ix = static_cast<int>(std::floor(ux));
    const int iy = static_cast<int>(std::floor(uy));
    const bool in_xy = ix >= 0 && ix < w && iy >= 0 && iy < h;
    const bool in_z = points(i, 2) >= grid.z_min && points(i, 2) < grid.z_max;
    if (!in_xy || !in_z) continue;

    out.pillar_index[i] = iy * w + ix;
    out.valid[i] = true;
    const Eigen::Vector2d center = grid.cell_center(ix, iy);
    out.center_offset(i, 0) = points(i, 0) - center.x();
    out.center_offset(i, 1) = points(i, 1) - center.y();
    out.center_offset(i, 2) = points(i, 2) - grid.z_mid();
  }

  // Cluster offsets against the per-pillar arithmetic mean.
  const auto members = detail::pillar_members(out.pillar_index, grid.cell_count());
  for (const auto& idx : members) {
    if (idx.empty()) continue;
    std::vector<int> order(idx);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      if (points(a, 0) != points(b, 0)) return points(a, 0) < points(b, 0);
      if (points(a, 1) != points(b, 1)) return points(a, 1) < points(b, 1);
      return points(a, 2) < points(b, 2);
    });
    Eigen::Vector3d sum = Eigen::Vector3d::Zero();
    for (int i : order) sum += points.row(i).transpose();
    const Eigen::Vector3d mean = sum / static_cast<double>(order.size());
    for (int i : idx) out.cluster_offset.row(i) = points.row(i) - mean.transpose();
  }
  return out;
}

// Raw per-point feature vector fed to the pillar encoder:
// [x, y, z, cluster_offset xyz, center_offset x, center_offset y].
inline constexpr int kPointFeatureDim = 8;

inline MatrixX<double> compute_point_features(const MatrixX3<double>& points,
                                              const PillarAssignment& assignment) {
  if (points.rows() != assignment.size()) {
    throw ValidationError("compute_point_features: point count does not match assignment");
  }
  const Eigen::Index n = points.rows();
  MatrixX<double> features = MatrixX<double>::Zero(n, kPointFeatureDim);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!assignment.valid[i]) continue;  // flagged rows stay zero
    features(i, 0) = points(i, 0);
    features(i, 1) = points(i, 1);
    features(i, 2) = points(i, 2);
    features(i, 3) = assignment.cluster_offset(i, 0);
    features(i, 4) = assignment.cluster_offset(i, 1);
    features(i, 5) = assignment.cluster_offset(i, 2);
    features(i, 6) = assignment.center_offset(i, 0);
    features(i, 7) = assignment.center_offset(i, 1);
  }
  return features;
}

template <typename T>
ScatterMaxResult<T> scatter_max_with_argmax(const MatrixX<T>& embeddings,
                                            const PillarAssignment& assignment,
                                            const GridConfig& grid) {
  if (embeddings.rows() != assignment.size()) {
    throw ValidationError("scatter_max: embedding count does not match assignment");
  }
  if (!embeddings.allFinite()) throw ValidationError("scatter_max: non-finite embeddings");

  const Eigen::Index channels = embeddings.cols();
  ScatterMaxResult<T> out;
  out.image.features = GridTensor<T>(grid.height(), grid.width(), channels);
  out.image.occupancy = Mask::Constant(grid.cell_count(), false);
  out.argmax = Eigen::MatrixXi::Constant(grid.cell_count(), channels, -1);

  for (Eigen::Index i = 0; i < assignment.size(); ++i) {
    const int cell = assignment.pillar_index[i];
    if (cell < 0) continue;
    if (!out.image.occupancy[cell]) {
      out.image.occupancy[cell] = true;
      out.image.features.data.row(cell) = embeddings.row(i);
      out.argmax.row(cell).setConstant(static_cast<int>(i));
      continue;
    }
    for (Eigen::Index c = 0; c < channels; ++c) {
      if (embeddings(i, c) > out.image.features.data(cell, c)) {
        out.image.features.data(cell, c) = embeddings(i, c);
        out.argmax(cell, c) = static_cast<int>(i);
      }
    }
  }
  return out;
}

template <typename T>
PseudoImage<T> scatter_max(const MatrixX<T>& embeddings, const PillarAssignment& assignment,
                           const GridConfig& grid) {
  return scatter_max_with_argmax(embeddings, assignment, grid).image;
}

// Routes upstream cell gradients back to the points that supplied each
// maximum.
template <typename T>
MatrixX<T> scatter_max_backward(const MatrixX<T>& d_image, const Eigen::MatrixXi& argmax,
                                Eigen::Index n_points) {
  MatrixX<T> d_embeddings = MatrixX<T>::Zero(n_points, d_image.cols());
  for (Eigen::Index cell = 0; cell < d_image.rows(); ++cell) {
    for (Eigen::Index c = 0; c < d_image.cols(); ++c) {
      const int i = argmax(cell, c);
      if (i >= 0) d_embeddings(i, c) += d_image(cell, c);
    }
  }
  return d_embeddings;
}

// Row i of the result is the grid cell addressed by pillar_index[i]; invalid
// points yield zero rows.
template <typename T>
MatrixX<T> gather_per_point(const GridTensor<T>& grid_features, const PillarAssignment& assignment) {
  MatrixX<T> out = MatrixX<T>::Zero(assignment.size(), grid_features.channels());
  for (Eigen::Index i = 0; i < assignment.size(); ++i) {
    const int cell = assignment.pillar_index[i];
    if (cell < 0) continue;
    if (cell >= grid_features.cells()) {
      throw InternalError("gather_per_point: pillar index outside grid; assignment/grid mismatch");
    }
    out.row(i) = grid_features.data.row(cell);
  }
  return out;
}

template <typename T>
MatrixX<T> gather_per_point(const PseudoImage<T>& image, const PillarAssignment& assignment) {
  return gather_per_point(image.features, assignment);
}

// Accumulates per-point gradients back into their cells.
template <typename T>
GridTensor<T> gather_backward(const MatrixX<T>& d_points, const PillarAssignment& assignment,
                              const GridConfig& grid) {
  GridTensor<T> out(grid.height(), grid.width(), d_points.cols());
  for (Eigen::Index i = 0; i < assignment.size(); ++i) {
    const int cell = assignment.pillar_index[i];
    if (cell >= 0) out.data.row(cell) += d_points.row(i);
  }
  return out;
}

}  // namespace deflow
