// Copyright (c) 2026 deflow-cpp contributors
// SPDX-License-Identifier: Apache-2.0

#include "deflow/harness/render.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>

#include "deflow/error.hpp"

namespace deflow {

namespace {

std::array<std::uint8_t, 3> hsv_to_rgb(double hue_deg, double sat, double val) {
  const double c = val * sat;
  const double hp = hue_deg / 60.0;
  const double x = c * (1.0 - std::fabs(std::fmod(hp, 2.0) - 1.0));
  double r = 0, g = 0, b = 0;
  if (hp < 1) {
    r = c; g = x;
  } else if (hp < 2) {
    r = x; g = c;
  } else if (hp < 3) {
    g = c; b = x;
  } else if (hp < 4) {
    g = x; b = c;
  } else if (hp < 5) {
    r = x; b = c;
  } else {
    r = c; b = x;
  }
  const double m = val - c;
  auto q = [](double u) { return static_cast<std::uint8_t>(std::lround(255.0 * std::clamp(u, 0.0, 1.0))); };
  return {q(r + m), q(g + m), q(b + m)};
}

}  // namespace

Image render_bev_image(const MatrixX3<double>& positions, const MatrixX3<double>& flow,
                       const GridConfig& grid, const RenderOptions& opt) {
  grid.validate();
  if (positions.rows() != flow.rows())
    throw ValidationError("render_bev_image: flow length does not match cloud");
  if (opt.scale < 1 || opt.dot < 1 || !(opt.s_max > 0.0))
    throw ValidationError("render_bev_image: bad render options");

  Image img;
  img.width = static_cast<int>(grid.width()) * opt.scale;
  img.height = static_cast<int>(grid.height()) * opt.scale;
  img.rgb.assign(static_cast<size_t>(img.width) * img.height * 3, 0);

  for (Eigen::Index i = 0; i < positions.rows(); ++i) {
    const double u = (positions(i, 0) - grid.origin.x()) / grid.extent_x;
    const double v = (positions(i, 1) - grid.origin.y()) / grid.extent_y;
    if (u < 0.0 || u >= 1.0 || v < 0.0 || v >= 1.0) continue;
    const int col = static_cast<int>(u * img.width);
    const int row = img.height - 1 - static_cast<int>(v * img.height);  // y up

    const double mag = flow.row(i).norm();
    const double hue = std::fmod(std::atan2(flow(i, 1), flow(i, 0)) * 180.0 / M_PI + 360.0, 360.0);
    const auto c = hsv_to_rgb(hue, std::min(mag / opt.s_max, 1.0), 1.0);
    for (int dy = 0; dy < opt.dot; ++dy) {
      for (int dx = 0; dx < opt.dot; ++dx) {
        const int rr = row + dy, cc = col + dx;
        if (rr >= 0 && rr < img.height && cc >= 0 && cc < img.width) img.set(rr, cc, c[0], c[1], c[2]);
      }
    }
  }
  return img;
}

void render_bev_flow(const FramePair& pair, const MatrixX3<double>& total_flow,
                     const std::filesystem::path& path, const GridConfig& grid,
                     const RenderOptions& opt) {
  pair.validate();
  write_ppm(render_bev_image(pair.cloud_t.positions.cast<double>(), total_flow, grid, opt), path);
}

Image render_histogram(const std::vector<int64_t>& counts, const std::vector<double>& edges,
                       int width, int height) {
  if (edges.size() != counts.size() + 1)
    throw ValidationError("render_histogram: need one more edge than counts");
  if (counts.empty()) throw ValidationError("render_histogram: empty histogram");
  if (width < 64 || height < 64) throw ValidationError("render_histogram: canvas too small");

  Image img;
  img.width = width;
  img.height = height;
  img.rgb.assign(static_cast<size_t>(width) * height * 3, 255);

  const int margin = 24;
  const int plot_w = width - 2 * margin;
  const int plot_h = height - 2 * margin;
  const int64_t peak = std::max<int64_t>(1, *std::max_element(counts.begin(), counts.end()));

  const int n = static_cast<int>(counts.size());
  for (int b = 0; b < n; ++b) {
    const int x0 = margin + (b * plot_w) / n + 1;
    const int x1 = margin + ((b + 1) * plot_w) / n - 1;
    const int bar_h = static_cast<int>((static_cast<double>(counts[b]) / peak) * plot_h);
    for (int x = x0; x <= x1; ++x) {
      for (int y = 0; y < bar_h; ++y) {
        img.set(height - 1 - margin - y, x, 60, 90, 200);
      }
    }
  }
  for (int x = margin; x < width - margin; ++x) img.set(height - 1 - margin, x, 0, 0, 0);
  for (int y = margin; y < height - margin; ++y) img.set(y, margin, 0, 0, 0);
  return img;
}

void write_ppm(const Image& img, const std::filesystem::path& path) {
  if (img.width < 1 || img.height < 1 ||
      img.rgb.size() != static_cast<size_t>(img.width) * img.height * 3)
    throw ValidationError("write_ppm: malformed image");
  std::FILE* f = std::fopen(path.string().c_str(), "wb");
  if (!f) throw IoError(path.string() + ": cannot open for writing");
  char header[64];
  const int header_len = std::snprintf(header, sizeof(header), "P6\n%d %d\n255\n", img.width, img.height);
  bool ok = std::fwrite(header, 1, static_cast<size_t>(header_len), f) == static_cast<size_t>(header_len);
  ok = ok && std::fwrite(img.rgb.data(), 1, img.rgb.size(), f) == img.rgb.size();
  ok = std::fflush(f) == 0 && ok;
  if (std::fclose(f) != 0) ok = false;
  if (!ok) throw IoError(path.string() + ": write failed");
}

}  // namespace deflow
