// Copyright (c) 2026 deflow-cpp contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>

#include <cstdint>

namespace deflow {

template <typename T>
using MatrixX = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
template <typename T>
using MatrixX3 = Eigen::Matrix<T, Eigen::Dynamic, 3>;
template <typename T>
using VectorX = Eigen::Matrix<T, Eigen::Dynamic, 1>;
template <typename T>
using Vector3 = Eigen::Matrix<T, 3, 1>;

using Mask = Eigen::Array<bool, Eigen::Dynamic, 1>;

// H x W x C feature grid stored as one row per cell, cells row-major
// (cell = y * w + x), one column per channel.
template <typename T>
struct GridTensor {
  int h = 0;
  int w = 0;
  MatrixX<T> data;

  GridTensor() = default;
  GridTensor(int height, int width, Eigen::Index channels)
      : h(height), w(width), data(MatrixX<T>::Zero(static_cast<Eigen::Index>(height) * width, channels)) {}

  Eigen::Index cells() const { return data.rows(); }
  Eigen::Index channels() const { return data.cols(); }
  Eigen::Index cell(int y, int x) const { return static_cast<Eigen::Index>(y) * w + x; }

  template <typename U>
  GridTensor<U> cast() const {
    GridTensor<U> out;
    out.h = h;
    out.w = w;
    out.data = data.template cast<U>();
    return out;
  }
};

}  // namespace deflow
