// Copyright (c) 2026 deflow-cpp contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdio>
#include <sstream>

#include "deflow/error.hpp"
#include "deflow/types.hpp"

namespace deflow {

enum class LossScheme { kForeground, kSpeed, kBucket };

inline const char* to_string(LossScheme s) {
  switch (s) {
    case LossScheme::kForeground: return "foreground";
    case LossScheme::kSpeed: return "speed";
    case LossScheme::kBucket: return "bucket";
  }
  return "?";
}

inline LossScheme parse_loss_scheme(const std::string& s) {
  if (s == "foreground") return LossScheme::kForeground;
  if (s == "speed") return LossScheme::kSpeed;
  if (s == "bucket") return LossScheme::kBucket;
  throw ValidationError("unknown loss scheme: " + s);
}

struct LossConfig {
  LossScheme scheme = LossScheme::kBucket;
  double low = 0.4;   // m/s
  double high = 1.0;  // m/s
  double dt = 0.1;    // seconds per frame interval

  void validate() const {
    if (!(low > 0.0 && low < high)) throw ValidationError("loss thresholds require 0 < low < high");
    if (!(dt > 0.0)) throw ValidationError("loss dt must be positive");
  }
};

// Supervision targets for the residual head: the ego-compensated ground-truth
// flow, its speed, and the foreground labels.
template <typename T>
struct ResidualTargets {
  MatrixX3<T> delta_gt;   // meters per frame interval
  VectorX<T> speeds;      // m/s, |delta_gt| / dt
  Mask foreground;

  Eigen::Index size() const { return delta_gt.rows(); }

  void validate() const {
    if (!delta_gt.allFinite()) throw ValidationError("residual targets contain non-finite flow");
    if (speeds.size() != delta_gt.rows() || foreground.size() != delta_gt.rows()) {
      throw ValidationError("residual target arrays have mismatched lengths");
    }
    if ((speeds.array() < T(0)).any()) throw ValidationError("residual target speeds must be >= 0");
  }
};

template <typename T>
ResidualTargets<T> make_residual_targets(const MatrixX3<T>& gt_flow, const MatrixX3<T>& ego,
                                         const Mask& foreground, double dt) {
  ResidualTargets<T> out;
  out.delta_gt = gt_flow - ego;
  out.speeds = out.delta_gt.rowwise().norm() / static_cast<T>(dt);
  out.foreground = foreground;
  return out;
}

// 1.0 for foreground points, 0.1 for background.
template <typename T>
VectorX<T> sigma_foreground(const Mask& foreground_mask) {
  VectorX<T> w(foreground_mask.size());
  for (Eigen::Index i = 0; i < w.size(); ++i) w[i] = foreground_mask[i] ? T(1) : T(0.1);
  return w;
}

// Speed-based scaling:
//   0.1            if s < low
//   1.0            if s > high
//   1.8 * s - 0.8  otherwise
// The middle branch is applied verbatim. With the default thresholds it is
// discontinuous at s = low (0.1 vs -0.08) and negative on (0.4, 0.4889);
// tests pin that behavior rather than smoothing it over.
template <typename T>
VectorX<T> sigma_speed(const VectorX<T>& speeds, double low = 0.4, double high = 1.0) {
  if ((speeds.array() < T(0)).any()) throw ValidationError("sigma_speed: negative speed");
  VectorX<T> w(speeds.size());
  for (Eigen::Index i = 0; i < speeds.size(); ++i) {
    const T s = speeds[i];
    if (s < T(low)) {
      w[i] = T(0.1);
    } else if (s > T(high)) {
      w[i] = T(1);
    } else {
      w[i] = T(1.8) * s - T(0.8);
    }
  }
  return w;
}

// Loss bucket by ground-truth ego-compensated speed: 0 below low, 1 on the
// closed interval [low, high], 2 above high.
template <typename T>
int speed_bucket(T s, double low = 0.4, double high = 1.0) {
  if (s < T(low)) return 0;
  if (s > T(high)) return 2;
  return 1;
}

namespace detail {
inline void warn_empty_loss(const char* which) {
  std::fprintf(stderr, "warning: %s over zero points, defined as 0\n", which);
}
}  // namespace detail

// Mean scaled L2 residual error: (1/N) sum_p w_p * |pred_p - gt_p|.
template <typename T>
T weighted_loss(const MatrixX3<T>& pred_residual, const ResidualTargets<T>& targets,
                const VectorX<T>& weights) {
  const Eigen::Index n = pred_residual.rows();
  if (targets.size() != n || weights.size() != n) {
    throw ValidationError("weighted_loss: mismatched lengths");
  }
  if (n == 0) {
    detail::warn_empty_loss("weighted_loss");
    return T(0);
  }
  const VectorX<T> norms = (pred_residual - targets.delta_gt).rowwise().norm();
  return weights.dot(norms) / static_cast<T>(n);
}

// Same value plus d(loss)/d(pred_residual). The norm's subgradient at exactly
// zero error is taken as zero.
template <typename T>
T weighted_loss_grad(const MatrixX3<T>& pred_residual, const ResidualTargets<T>& targets,
                     const VectorX<T>& weights, MatrixX3<T>* grad) {
  const Eigen::Index n = pred_residual.rows();
  if (targets.size() != n || weights.size() != n) {
    throw ValidationError("weighted_loss: mismatched lengths");
  }
  *grad = MatrixX3<T>::Zero(n, 3);
  if (n == 0) {
    detail::warn_empty_loss("weighted_loss");
    return T(0);
  }
  const MatrixX3<T> err = pred_residual - targets.delta_gt;
  T total = T(0);
  for (Eigen::Index i = 0; i < n; ++i) {
    const T norm = err.row(i).norm();
    total += weights[i] * norm;
    if (norm > T(0)) grad->row(i) = (weights[i] / (static_cast<T>(n) * norm)) * err.row(i);
  }
  return total / static_cast<T>(n);
}

// Sum over the three speed buckets of each bucket's mean residual error.
// Empty buckets contribute 0.
template <typename T>
T bucket_loss_grad(const MatrixX3<T>& pred_residual, const ResidualTargets<T>& targets,
                   MatrixX3<T>* grad, double low = 0.4, double high = 1.0) {
  const Eigen::Index n = pred_residual.rows();
  if (targets.size() != n) throw ValidationError("bucket_loss: mismatched lengths");
  *grad = MatrixX3<T>::Zero(n, 3);
  if (n == 0) {
    detail::warn_empty_loss("bucket_loss");
    return T(0);
  }

  Eigen::Index counts[3] = {0, 0, 0};
  for (Eigen::Index i = 0; i < n; ++i) ++counts[speed_bucket(targets.speeds[i], low, high)];

  const MatrixX3<T> err = pred_residual - targets.delta_gt;
  T sums[3] = {T(0), T(0), T(0)};
  for (Eigen::Index i = 0; i < n; ++i) {
    const int b = speed_bucket(targets.speeds[i], low, high);
    const T norm = err.row(i).norm();
    sums[b] += norm;
    if (norm > T(0)) grad->row(i) = err.row(i) / (static_cast<T>(counts[b]) * norm);
  }
  T total = T(0);
  for (int b = 0; b < 3; ++b) {
    if (counts[b] > 0) total += sums[b] / static_cast<T>(counts[b]);
  }
  return total;
}

template <typename T>
T bucket_loss(const MatrixX3<T>& pred_residual, const ResidualTargets<T>& targets,
              double low = 0.4, double high = 1.0) {
  MatrixX3<T> ignored;
  return bucket_loss_grad(pred_residual, targets, &ignored, low, high);
}

// Scheme dispatch used by the training loop.
template <typename T>
T loss_with_grad(const MatrixX3<T>& pred_residual, const ResidualTargets<T>& targets,
                 const LossConfig& cfg, MatrixX3<T>* grad) {
  switch (cfg.scheme) {
    case LossScheme::kForeground:
      return weighted_loss_grad(pred_residual, targets, sigma_foreground<T>(targets.foreground), grad);
    case LossScheme::kSpeed:
      return weighted_loss_grad(pred_residual, targets, sigma_speed<T>(targets.speeds, cfg.low, cfg.high),
                                grad);
    case LossScheme::kBucket:
      return bucket_loss_grad(pred_residual, targets, grad, cfg.low, cfg.high);
  }
  throw ValidationError("unknown loss scheme");
}

}  // namespace deflow
