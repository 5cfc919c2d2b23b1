// Copyright (c) 2026 deflow-cpp contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "deflow/frame.hpp"
#include "deflow/voxelizer.hpp"

namespace deflow {

struct Image {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;  // row-major, top row first

  void set(int row, int col, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    const size_t at = 3 * (static_cast<size_t>(row) * width + col);
    rgb[at] = r;
    rgb[at + 1] = g;
    rgb[at + 2] = b;
  }
};

struct RenderOptions {
  int scale = 8;       // pixels per grid cell
  int dot = 2;         // point marker size in pixels
  double s_max = 2.0;  // meters per frame at full saturation
};

// Top-down scatter plot: hue encodes flow direction (atan2 of y over x on a
// color wheel), saturation encodes magnitude capped at s_max, points render
// white when the flow is zero. Background stays black. Pure function of its
// inputs, so output bytes are reproducible.
Image render_bev_image(const MatrixX3<double>& positions, const MatrixX3<double>& flow,
                       const GridConfig& grid, const RenderOptions& opt = {});

void render_bev_flow(const FramePair& pair, const MatrixX3<double>& total_flow,
                     const std::filesystem::path& path, const GridConfig& grid,
                     const RenderOptions& opt = {});

// Bar chart of histogram counts; white background, filled bars, baseline axis.
Image render_histogram(const std::vector<int64_t>& counts, const std::vector<double>& edges,
                       int width = 640, int height = 400);

// Binary PPM (P6).
void write_ppm(const Image& img, const std::filesystem::path& path);

}  // namespace deflow
