// Copyright (c) 2026 deflow-cpp contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>

#include "deflow/error.hpp"
#include "deflow/network/params.hpp"
#include "deflow/types.hpp"

namespace deflow {

// All layers share one convention: forward() is const and pure, backward()
// takes the forward input plus the output gradient, accumulates (+=) into the
// parameter grads and returns the input gradient. Caches are the caller's
// problem; layers recompute nothing except im2col.

template <typename T>
struct Linear {
  ParamBlock<T>* w = nullptr;  // (out, in)
  ParamBlock<T>* b = nullptr;  // (out, 1)

  Eigen::Index in_dim() const { return w->value.cols(); }
  Eigen::Index out_dim() const { return w->value.rows(); }

  // x: (n, in) -> (n, out)
  MatrixX<T> forward(const MatrixX<T>& x) const {
    if (x.cols() != in_dim()) throw InternalError("linear: input dim mismatch");
    MatrixX<T> y = x * w->value.transpose();
    y.rowwise() += b->value.col(0).transpose();
    return y;
  }

  MatrixX<T> backward(const MatrixX<T>& x, const MatrixX<T>& d_out) {
    w->grad.noalias() += d_out.transpose() * x;
    b->grad.col(0).noalias() += d_out.colwise().sum().transpose();
    return d_out * w->value;
  }
};

inline int conv_out_dim(int n, int stride) { return (n - 1) / stride + 1; }

// 3x3 patches with zero padding 1, flattened as c * 9 + ky * 3 + kx.
template <typename T>
MatrixX<T> im2col3(const GridTensor<T>& x, int stride) {
  const int h_out = conv_out_dim(x.h, stride);
  const int w_out = conv_out_dim(x.w, stride);
  const Eigen::Index cin = x.channels();
  MatrixX<T> patches = MatrixX<T>::Zero(static_cast<Eigen::Index>(h_out) * w_out, cin * 9);
  for (int oy = 0; oy < h_out; ++oy) {
    for (int ox = 0; ox < w_out; ++ox) {
      const Eigen::Index row = static_cast<Eigen::Index>(oy) * w_out + ox;
      for (int ky = 0; ky < 3; ++ky) {
        const int iy = oy * stride + ky - 1;
        if (iy < 0 || iy >= x.h) continue;
        for (int kx = 0; kx < 3; ++kx) {
          const int ix = ox * stride + kx - 1;
          if (ix < 0 || ix >= x.w) continue;
          const Eigen::Index cell = x.cell(iy, ix);
          for (Eigen::Index c = 0; c < cin; ++c) {
            patches(row, c * 9 + ky * 3 + kx) = x.data(cell, c);
          }
        }
      }
    }
  }
  return patches;
}

// Adjoint of im2col3: scatter-add patch gradients back onto the input grid.
template <typename T>
GridTensor<T> col2im3(const MatrixX<T>& d_patches, int in_h, int in_w, Eigen::Index cin, int stride) {
  const int h_out = conv_out_dim(in_h, stride);
  const int w_out = conv_out_dim(in_w, stride);
  GridTensor<T> d_x(in_h, in_w, cin);
  for (int oy = 0; oy < h_out; ++oy) {
    for (int ox = 0; ox < w_out; ++ox) {
      const Eigen::Index row = static_cast<Eigen::Index>(oy) * w_out + ox;
      for (int ky = 0; ky < 3; ++ky) {
        const int iy = oy * stride + ky - 1;
        if (iy < 0 || iy >= in_h) continue;
        for (int kx = 0; kx < 3; ++kx) {
          const int ix = ox * stride + kx - 1;
          if (ix < 0 || ix >= in_w) continue;
          const Eigen::Index cell = static_cast<Eigen::Index>(iy) * in_w + ix;
          for (Eigen::Index c = 0; c < cin; ++c) {
            d_x.data(cell, c) += d_patches(row, c * 9 + ky * 3 + kx);
          }
        }
      }
    }
  }
  return d_x;
}

// 3x3 convolution, padding 1, stride 1 or 2, via im2col + GEMM.
template <typename T>
struct Conv2d {
  ParamBlock<T>* w = nullptr;  // (c_out, c_in * 9)
  ParamBlock<T>* b = nullptr;  // (c_out, 1)
  int stride = 1;

  Eigen::Index in_channels() const { return w->value.cols() / 9; }
  Eigen::Index out_channels() const { return w->value.rows(); }

  GridTensor<T> forward(const GridTensor<T>& x) const {
    if (x.channels() != in_channels()) throw InternalError("conv2d: channel mismatch");
    GridTensor<T> y(conv_out_dim(x.h, stride), conv_out_dim(x.w, stride), out_channels());
    y.data.noalias() = im2col3(x, stride) * w->value.transpose();
    y.data.rowwise() += b->value.col(0).transpose();
    return y;
  }

  GridTensor<T> backward(const GridTensor<T>& x, const GridTensor<T>& d_out) {
    MatrixX<T> patches = im2col3(x, stride);
    w->grad.noalias() += d_out.data.transpose() * patches;
    b->grad.col(0).noalias() += d_out.data.colwise().sum().transpose();
    MatrixX<T> d_patches = d_out.data * w->value;
    return col2im3(d_patches, x.h, x.w, in_channels(), stride);
  }
};

template <typename T>
MatrixX<T> leaky_relu(const MatrixX<T>& x, T slope) {
  return x.array().max(x.array() * slope).matrix();
}

// Takes the forward *output*; the output sign equals the input sign for any
// positive slope, so the input need not be kept around.
template <typename T>
MatrixX<T> leaky_relu_backward(const MatrixX<T>& y, const MatrixX<T>& d_out, T slope) {
  return (y.array() >= T(0)).select(d_out, d_out * slope);
}

template <typename T>
MatrixX<T> sigmoid(const MatrixX<T>& x) {
  return (T(1) / (T(1) + (-x.array()).exp())).matrix();
}

template <typename T>
MatrixX<T> sigmoid_backward(const MatrixX<T>& y, const MatrixX<T>& d_out) {
  return (d_out.array() * y.array() * (T(1) - y.array())).matrix();
}

template <typename T>
MatrixX<T> tanh_act(const MatrixX<T>& x) {
  return x.array().tanh().matrix();
}

template <typename T>
MatrixX<T> tanh_backward(const MatrixX<T>& y, const MatrixX<T>& d_out) {
  return (d_out.array() * (T(1) - y.array().square())).matrix();
}

// Nearest-neighbour 2x upsample: each source cell fans out to a 2x2 block.
template <typename T>
GridTensor<T> upsample2x(const GridTensor<T>& x) {
  GridTensor<T> y(x.h * 2, x.w * 2, x.channels());
  for (int iy = 0; iy < x.h; ++iy) {
    for (int ix = 0; ix < x.w; ++ix) {
      const auto row = x.data.row(x.cell(iy, ix));
      for (int dy = 0; dy < 2; ++dy) {
        for (int dx = 0; dx < 2; ++dx) {
          y.data.row(y.cell(iy * 2 + dy, ix * 2 + dx)) = row;
        }
      }
    }
  }
  return y;
}

template <typename T>
GridTensor<T> upsample2x_backward(const GridTensor<T>& d_out, int in_h, int in_w) {
  if (d_out.h != in_h * 2 || d_out.w != in_w * 2) throw InternalError("upsample2x_backward: dim mismatch");
  GridTensor<T> d_x(in_h, in_w, d_out.channels());
  for (int iy = 0; iy < in_h; ++iy) {
    for (int ix = 0; ix < in_w; ++ix) {
      auto row = d_x.data.row(d_x.cell(iy, ix));
      for (int dy = 0; dy < 2; ++dy) {
        for (int dx = 0; dx < 2; ++dx) {
          row += d_out.data.row(d_out.cell(iy * 2 + dy, ix * 2 + dx));
        }
      }
    }
  }
  return d_x;
}

template <typename T>
MatrixX<T> hconcat(const MatrixX<T>& a, const MatrixX<T>& b) {
  if (a.rows() != b.rows()) throw InternalError("hconcat: row mismatch");
  MatrixX<T> out(a.rows(), a.cols() + b.cols());
  out << a, b;
  return out;
}

template <typename T>
GridTensor<T> grid_concat(const GridTensor<T>& a, const GridTensor<T>& b) {
  if (a.h != b.h || a.w != b.w) throw InternalError("grid_concat: dim mismatch");
  GridTensor<T> out(a.h, a.w, a.channels() + b.channels());
  out.data << a.data, b.data;
  return out;
}

template <typename T>
GridTensor<T> grid_concat3(const GridTensor<T>& a, const GridTensor<T>& b, const GridTensor<T>& c) {
  if (a.h != b.h || a.w != b.w || a.h != c.h || a.w != c.w) throw InternalError("grid_concat3: dim mismatch");
  GridTensor<T> out(a.h, a.w, a.channels() + b.channels() + c.channels());
  out.data << a.data, b.data, c.data;
  return out;
}

}  // namespace deflow
