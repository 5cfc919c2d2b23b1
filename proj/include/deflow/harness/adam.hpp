// Copyright (c) 2026 deflow-cpp contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <vector>

#include "deflow/error.hpp"
#include "deflow/network/params.hpp"

namespace deflow {

// Standard bias-corrected Adam over a parameter registry. Moment state is
// indexed by registration order.
template <typename T>
class Adam {
 public:
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  void init(const ParamRegistry<T>& params) {
    m_.clear();
    v_.clear();
    for (size_t i = 0; i < params.count(); ++i) {
      const auto& b = params.block(i);
      m_.push_back(MatrixX<T>::Zero(b.value.rows(), b.value.cols()));
      v_.push_back(MatrixX<T>::Zero(b.value.rows(), b.value.cols()));
    }
    t_ = 0;
  }

  void step(ParamRegistry<T>& params) {
    if (m_.size() != params.count()) throw InternalError("adam: not initialized for this registry");
    ++t_;
    const T b1 = static_cast<T>(beta1);
    const T b2 = static_cast<T>(beta2);
    const T corr1 = static_cast<T>(1.0 - std::pow(beta1, static_cast<double>(t_)));
    const T corr2 = static_cast<T>(1.0 - std::pow(beta2, static_cast<double>(t_)));
    for (size_t i = 0; i < params.count(); ++i) {
      auto& b = params.block(i);
      m_[i] = b1 * m_[i] + (T(1) - b1) * b.grad;
      v_[i] = (b2 * v_[i].array() + (T(1) - b2) * b.grad.array().square()).matrix();
      const auto m_hat = m_[i].array() / corr1;
      const auto v_hat = v_[i].array() / corr2;
      b.value.array() -= static_cast<T>(lr) * m_hat / (v_hat.sqrt() + static_cast<T>(eps));
    }
  }

  int64_t steps_taken() const { return t_; }

 private:
  std::vector<MatrixX<T>> m_, v_;
  int64_t t_ = 0;
};

}  // namespace deflow
