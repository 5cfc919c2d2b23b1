// Copyright (c) 2026 deflow-cpp contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "deflow/error.hpp"
#include "deflow/network/layers.hpp"
#include "deflow/types.hpp"

namespace deflow {

struct UNetConfig {
  std::vector<int> channels{32, 64, 128};  // per pyramid level, full resolution first
  int out_channels = 32;
  double leaky_slope = 0.1;

  int levels() const { return static_cast<int>(channels.size()); }
  // Every downsampling halves the grid, so dims must divide evenly.
  int stride_total() const { return 1 << (levels() - 1); }

  void validate() const {
    if (channels.empty()) throw ValidationError("unet: channels must be non-empty");
    for (int c : channels)
      if (c <= 0) throw ValidationError("unet: channels must be positive");
    if (out_channels <= 0) throw ValidationError("unet: out_channels must be positive");
    if (leaky_slope <= 0.0 || leaky_slope >= 1.0) throw ValidationError("unet: leaky_slope must be in (0, 1)");
  }
};

// Two pseudo-images go through one shared-weight encoder; the decoder fuses
// both pyramids (skip connections from both frames at every level) and emits
// a single feature grid at full resolution.
template <typename T>
struct UNet {
  UNetConfig cfg;
  Conv2d<T> enc_in;                // c_in -> channels[0]
  std::vector<Conv2d<T>> down;     // channels[l-1] -> channels[l], stride 2
  std::vector<Conv2d<T>> enc;      // channels[l] -> channels[l], stride 1
  Conv2d<T> fuse;                  // 2 * channels[last] -> channels[last]
  std::vector<Conv2d<T>> dec;      // indexed by level 0..L-2: channels[l+1] + 2 * channels[l] -> channels[l]
  Conv2d<T> out;                   // channels[0] -> out_channels
};

template <typename T>
struct UNetFrameCache {
  GridTensor<T> input;
  std::vector<GridTensor<T>> e;       // post-activation encoder features per level
  std::vector<GridTensor<T>> down_a;  // post-activation strided conv output, level 1..L-1
};

template <typename T>
struct UNetCache {
  UNetFrameCache<T> frame_t, frame_t1;
  GridTensor<T> fused;                // post-activation bottleneck
  std::vector<GridTensor<T>> dec_a;   // post-activation decoder features, indexed by level 0..L-2
};

namespace detail {

template <typename T>
void unet_encode(const UNet<T>& net, const GridTensor<T>& img, UNetFrameCache<T>& fc) {
  const int levels = net.cfg.levels();
  const T slope = static_cast<T>(net.cfg.leaky_slope);
  fc.input = img;
  fc.e.resize(levels);
  fc.down_a.resize(levels - 1);
  GridTensor<T> a = net.enc_in.forward(img);
  a.data = leaky_relu(a.data, slope);
  fc.e[0] = a;
  for (int l = 1; l < levels; ++l) {
    GridTensor<T> d = net.down[l - 1].forward(fc.e[l - 1]);
    d.data = leaky_relu(d.data, slope);
    fc.down_a[l - 1] = d;
    GridTensor<T> e = net.enc[l - 1].forward(d);
    e.data = leaky_relu(e.data, slope);
    fc.e[l] = e;
  }
}

template <typename T>
GridTensor<T> unet_encode_backward(UNet<T>& net, const UNetFrameCache<T>& fc, std::vector<GridTensor<T>>& d_e) {
  const int levels = net.cfg.levels();
  const T slope = static_cast<T>(net.cfg.leaky_slope);
  GridTensor<T> d = d_e[levels - 1];
  for (int l = levels - 1; l >= 1; --l) {
    d.data = leaky_relu_backward(fc.e[l].data, d.data, slope);
    GridTensor<T> d_down = net.enc[l - 1].backward(fc.down_a[l - 1], d);
    d_down.data = leaky_relu_backward(fc.down_a[l - 1].data, d_down.data, slope);
    d = net.down[l - 1].backward(fc.e[l - 1], d_down);
    d.data += d_e[l - 1].data;
  }
  d.data = leaky_relu_backward(fc.e[0].data, d.data, slope);
  return net.enc_in.backward(fc.input, d);
}

}  // namespace detail

template <typename T>
GridTensor<T> unet_forward(const UNet<T>& net, const GridTensor<T>& img_t, const GridTensor<T>& img_t1,
                           UNetCache<T>* cache) {
  if (img_t.h != img_t1.h || img_t.w != img_t1.w || img_t.channels() != img_t1.channels())
    throw ValidationError("unet: frame images must have identical shape");
  const int stride = net.cfg.stride_total();
  if (img_t.h % stride != 0 || img_t.w % stride != 0)
    throw ValidationError("unet: grid dims must be divisible by " + std::to_string(stride));

  const int levels = net.cfg.levels();
  const T slope = static_cast<T>(net.cfg.leaky_slope);
  detail::unet_encode(net, img_t, cache->frame_t);
  detail::unet_encode(net, img_t1, cache->frame_t1);

  GridTensor<T> cur = net.fuse.forward(grid_concat(cache->frame_t.e[levels - 1], cache->frame_t1.e[levels - 1]));
  cur.data = leaky_relu(cur.data, slope);
  cache->fused = cur;

  cache->dec_a.resize(levels - 1);
  for (int l = levels - 2; l >= 0; --l) {
    GridTensor<T> up = upsample2x(cur);
    GridTensor<T> cat = grid_concat3(up, cache->frame_t.e[l], cache->frame_t1.e[l]);
    cur = net.dec[l].forward(cat);
    cur.data = leaky_relu(cur.data, slope);
    cache->dec_a[l] = cur;
  }
  return net.out.forward(cur);
}

// d_out matches the forward return. Returns gradients for both input images.
template <typename T>
void unet_backward(UNet<T>& net, const UNetCache<T>& cache, const GridTensor<T>& d_out,
                   GridTensor<T>* d_img_t, GridTensor<T>* d_img_t1) {
  const int levels = net.cfg.levels();
  const T slope = static_cast<T>(net.cfg.leaky_slope);

  std::vector<GridTensor<T>> d_e_t(levels), d_e_t1(levels);
  for (int l = 0; l < levels; ++l) {
    const auto& ref = cache.frame_t.e[l];
    d_e_t[l] = GridTensor<T>(ref.h, ref.w, ref.channels());
    d_e_t1[l] = GridTensor<T>(ref.h, ref.w, ref.channels());
  }

  const GridTensor<T>& last = levels >= 2 ? cache.dec_a[0] : cache.fused;
  GridTensor<T> d_cur = net.out.backward(last, d_out);

  for (int l = 0; l < levels - 1; ++l) {
    d_cur.data = leaky_relu_backward(cache.dec_a[l].data, d_cur.data, slope);
    const GridTensor<T>& prev = l == levels - 2 ? cache.fused : cache.dec_a[l + 1];
    GridTensor<T> up = upsample2x(prev);
    GridTensor<T> cat = grid_concat3(up, cache.frame_t.e[l], cache.frame_t1.e[l]);
    GridTensor<T> d_cat = net.dec[l].backward(cat, d_cur);

    const Eigen::Index c_up = up.channels();
    const Eigen::Index c_skip = cache.frame_t.e[l].channels();
    GridTensor<T> d_up(cat.h, cat.w, c_up);
    d_up.data = d_cat.data.leftCols(c_up);
    d_e_t[l].data += d_cat.data.middleCols(c_up, c_skip);
    d_e_t1[l].data += d_cat.data.rightCols(c_skip);
    d_cur = upsample2x_backward(d_up, prev.h, prev.w);
  }

  d_cur.data = leaky_relu_backward(cache.fused.data, d_cur.data, slope);
  GridTensor<T> bottleneck_in =
      grid_concat(cache.frame_t.e[levels - 1], cache.frame_t1.e[levels - 1]);
  GridTensor<T> d_bottleneck = net.fuse.backward(bottleneck_in, d_cur);
  const Eigen::Index c_last = cache.frame_t.e[levels - 1].channels();
  d_e_t[levels - 1].data += d_bottleneck.data.leftCols(c_last);
  d_e_t1[levels - 1].data += d_bottleneck.data.rightCols(c_last);

  *d_img_t = detail::unet_encode_backward(net, cache.frame_t, d_e_t);
  *d_img_t1 = detail::unet_encode_backward(net, cache.frame_t1, d_e_t1);
}

}  // namespace deflow
