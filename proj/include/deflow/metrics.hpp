// Copyright (c) 2026 deflow-cpp contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdio>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "deflow/error.hpp"
#include "deflow/types.hpp"

namespace deflow {

inline constexpr double kDynamicThreshold = 0.05;  // meters per frame interval

enum class MotionClass : std::uint8_t { kFD, kFS, kBS, kOutOfRange };

// Per-point motion classes. A point is dynamic when its ego-compensated
// ground-truth flow magnitude strictly exceeds the threshold. Background
// points that are dynamic (possible with noisy labels) count under FD so no
// labeled point is dropped; bg_dynamic_count keeps that choice auditable.
struct MotionClassLabels {
  std::vector<MotionClass> cls;
  Mask is_dynamic_gt;
  Mask is_dynamic_pred;
  Eigen::Index bg_dynamic_count = 0;

  Eigen::Index size() const { return static_cast<Eigen::Index>(cls.size()); }
};

inline MotionClassLabels classify_motion(const MatrixX3<double>& gt_flow, const MatrixX3<double>& ego,
                                         const Mask& fg_mask, double dyn_threshold = kDynamicThreshold,
                                         const Mask* in_range = nullptr) {
  if (!(dyn_threshold > 0.0)) throw ValidationError("dynamic threshold must be positive");
  const Eigen::Index n = gt_flow.rows();
  if (ego.rows() != n || fg_mask.size() != n || (in_range && in_range->size() != n)) {
    throw ValidationError("classify_motion: mismatched lengths");
  }
  MotionClassLabels out;
  out.cls.resize(static_cast<size_t>(n));
  out.is_dynamic_gt = Mask::Constant(n, false);
  out.is_dynamic_pred = Mask::Constant(n, false);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (in_range && !(*in_range)[i]) {
      out.cls[static_cast<size_t>(i)] = MotionClass::kOutOfRange;
      continue;
    }
    const bool dynamic = (gt_flow.row(i) - ego.row(i)).norm() > dyn_threshold;
    out.is_dynamic_gt[i] = dynamic;
    if (dynamic) {
      out.cls[static_cast<size_t>(i)] = MotionClass::kFD;
      if (!fg_mask[i]) ++out.bg_dynamic_count;
    } else {
      out.cls[static_cast<size_t>(i)] = fg_mask[i] ? MotionClass::kFS : MotionClass::kBS;
    }
  }
  return out;
}

inline Mask predicted_dynamic(const MatrixX3<double>& pred_total, const MatrixX3<double>& ego,
                              double dyn_threshold = kDynamicThreshold) {
  Mask out = Mask::Constant(pred_total.rows(), false);
  for (Eigen::Index i = 0; i < pred_total.rows(); ++i) {
    out[i] = (pred_total.row(i) - ego.row(i)).norm() > dyn_threshold;
  }
  return out;
}

struct EvalReport {
  double epe_3way = 0.0;
  double epe_fd = 0.0;
  double epe_bs = 0.0;
  double epe_fs = 0.0;
  double epe_mean = 0.0;  // plain mean over all in-range points
  double dynamic_iou = 0.0;
  double acc_relax = 0.0;
  double acc_strict = 0.0;
  Eigen::Index count_fd = 0;
  Eigen::Index count_bs = 0;
  Eigen::Index count_fs = 0;
  Eigen::Index count_out = 0;
  Eigen::Index bg_dynamic_count = 0;
  // Set when the corresponding population was empty and the value is a
  // convention (EPE 0, accuracy/IoU 1) rather than a measurement.
  bool fd_empty = false;
  bool bs_empty = false;
  bool fs_empty = false;
  bool iou_undefined = false;

  std::string to_table() const;
  std::string to_key_values() const;
};

// Per-class mean end-point error of the total flow. Empty classes report 0
// with a flag; the 3-way value is always the unweighted mean of the three.
inline void epe_breakdown(const MatrixX3<double>& pred_total, const MatrixX3<double>& gt_total,
                          const MotionClassLabels& labels, EvalReport* report) {
  const Eigen::Index n = pred_total.rows();
  if (gt_total.rows() != n || labels.size() != n) {
    throw ValidationError("epe_breakdown: mismatched lengths");
  }
  double sums[3] = {0.0, 0.0, 0.0};
  Eigen::Index counts[3] = {0, 0, 0};
  report->count_out = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const MotionClass c = labels.cls[static_cast<size_t>(i)];
    if (c == MotionClass::kOutOfRange) {
      ++report->count_out;
      continue;
    }
    const int k = static_cast<int>(c);
    sums[k] += (pred_total.row(i) - gt_total.row(i)).norm();
    ++counts[k];
  }
  report->count_fd = counts[0];
  report->count_fs = counts[1];
  report->count_bs = counts[2];
  report->fd_empty = counts[0] == 0;
  report->fs_empty = counts[1] == 0;
  report->bs_empty = counts[2] == 0;
  report->epe_fd = counts[0] > 0 ? sums[0] / static_cast<double>(counts[0]) : 0.0;
  report->epe_fs = counts[1] > 0 ? sums[1] / static_cast<double>(counts[1]) : 0.0;
  report->epe_bs = counts[2] > 0 ? sums[2] / static_cast<double>(counts[2]) : 0.0;
  report->epe_3way = (report->epe_fd + report->epe_bs + report->epe_fs) / 3.0;
  const Eigen::Index in_range = counts[0] + counts[1] + counts[2];
  report->epe_mean = in_range > 0 ? (sums[0] + sums[1] + sums[2]) / static_cast<double>(in_range) : 0.0;
  report->bg_dynamic_count = labels.bg_dynamic_count;
}

inline constexpr double kAccRelaxThreshold = 0.1;
inline constexpr double kAccStrictThreshold = 0.05;

// Fraction of FD points whose error passes either the absolute bound (metres)
// or the same number as a relative bound, both strict "<". Relaxed: 0.1 m or
// 10%; strict: 0.05 m or 5%. Defined as 1.0 when there are no FD points.
inline std::pair<double, double> dynamic_accuracy(const MatrixX3<double>& pred_total,
                                                  const MatrixX3<double>& gt_total,
                                                  const MotionClassLabels& labels,
                                                  double relax_threshold = kAccRelaxThreshold,
                                                  double strict_threshold = kAccStrictThreshold) {
  const Eigen::Index n = pred_total.rows();
  if (gt_total.rows() != n || labels.size() != n) {
    throw ValidationError("dynamic_accuracy: mismatched lengths");
  }
  Eigen::Index fd = 0, relax = 0, strict = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (labels.cls[static_cast<size_t>(i)] != MotionClass::kFD) continue;
    ++fd;
    const double err = (pred_total.row(i) - gt_total.row(i)).norm();
    const double gt_norm = gt_total.row(i).norm();
    const double rel = gt_norm > 0.0 ? err / gt_norm : std::numeric_limits<double>::infinity();
    if (err < relax_threshold || rel < relax_threshold) ++relax;
    if (err < strict_threshold || rel < strict_threshold) ++strict;
  }
  if (fd == 0) return {1.0, 1.0};
  return {static_cast<double>(relax) / static_cast<double>(fd),
          static_cast<double>(strict) / static_cast<double>(fd)};
}

// TP / (TP + FP + FN) with dynamic as the positive class, over in-range
// points. 1.0 (flagged undefined by the caller) when all three are zero.
inline double dynamic_iou(const MotionClassLabels& labels) {
  Eigen::Index tp = 0, fp = 0, fn = 0;
  for (Eigen::Index i = 0; i < labels.size(); ++i) {
    if (labels.cls[static_cast<size_t>(i)] == MotionClass::kOutOfRange) continue;
    const bool gt = labels.is_dynamic_gt[i];
    const bool pred = labels.is_dynamic_pred[i];
    if (gt && pred) ++tp;
    if (!gt && pred) ++fp;
    if (gt && !pred) ++fn;
  }
  if (tp + fp + fn == 0) return 1.0;
  return static_cast<double>(tp) / static_cast<double>(tp + fp + fn);
}

// Full per-scene evaluation: classes from ground truth, predictions only
// inside the IoU.
inline EvalReport evaluate_scene(const MatrixX3<double>& pred_total, const MatrixX3<double>& gt_total,
                                 const MatrixX3<double>& ego, const Mask& fg_mask,
                                 double dyn_threshold = kDynamicThreshold,
                                 const Mask* in_range = nullptr,
                                 double relax_threshold = kAccRelaxThreshold,
                                 double strict_threshold = kAccStrictThreshold) {
  MotionClassLabels labels = classify_motion(gt_total, ego, fg_mask, dyn_threshold, in_range);
  labels.is_dynamic_pred = predicted_dynamic(pred_total, ego, dyn_threshold);
  EvalReport report;
  epe_breakdown(pred_total, gt_total, labels, &report);
  const auto acc = dynamic_accuracy(pred_total, gt_total, labels, relax_threshold, strict_threshold);
  report.acc_relax = acc.first;
  report.acc_strict = acc.second;
  Eigen::Index tp_fp_fn = 0;
  for (Eigen::Index i = 0; i < labels.size(); ++i) {
    if (labels.cls[static_cast<size_t>(i)] == MotionClass::kOutOfRange) continue;
    tp_fp_fn += (labels.is_dynamic_gt[i] || labels.is_dynamic_pred[i]) ? 1 : 0;
  }
  report.iou_undefined = tp_fp_fn == 0;
  report.dynamic_iou = dynamic_iou(labels);
  return report;
}

// Plain unweighted mean over per-scene reports; counts are summed.
inline EvalReport mean_report(const std::vector<EvalReport>& reports) {
  EvalReport out;
  if (reports.empty()) return out;
  for (const auto& r : reports) {
    out.epe_3way += r.epe_3way;
    out.epe_fd += r.epe_fd;
    out.epe_bs += r.epe_bs;
    out.epe_fs += r.epe_fs;
    out.epe_mean += r.epe_mean;
    out.dynamic_iou += r.dynamic_iou;
    out.acc_relax += r.acc_relax;
    out.acc_strict += r.acc_strict;
    out.count_fd += r.count_fd;
    out.count_bs += r.count_bs;
    out.count_fs += r.count_fs;
    out.count_out += r.count_out;
    out.bg_dynamic_count += r.bg_dynamic_count;
  }
  const double k = static_cast<double>(reports.size());
  out.epe_3way /= k;
  out.epe_fd /= k;
  out.epe_bs /= k;
  out.epe_fs /= k;
  out.epe_mean /= k;
  out.dynamic_iou /= k;
  out.acc_relax /= k;
  out.acc_strict /= k;
  return out;
}

inline std::string EvalReport::to_table() const {
  char buf[512];
  std::snprintf(buf, sizeof(buf),
                "%-12s %-10s %-10s %-10s %-12s %-11s %-11s\n"
                "%-12.4f %-10.4f %-10.4f %-10.4f %-12.4f %-11.4f %-11.4f\n"
                "counts: FD=%lld BS=%lld FS=%lld out-of-range=%lld bg-dynamic=%lld\n",
                "EPE 3-Way", "EPE FD", "EPE BS", "EPE FS", "Dynamic IoU", "AccRelax", "AccStrict",
                epe_3way, epe_fd, epe_bs, epe_fs, dynamic_iou, acc_relax, acc_strict,
                static_cast<long long>(count_fd), static_cast<long long>(count_bs),
                static_cast<long long>(count_fs), static_cast<long long>(count_out),
                static_cast<long long>(bg_dynamic_count));
  return buf;
}

inline std::string EvalReport::to_key_values() const {
  char buf[768];
  std::snprintf(buf, sizeof(buf),
                "epe_3way %.6f\nepe_fd %.6f\nepe_bs %.6f\nepe_fs %.6f\nepe_mean %.6f\n"
                "dynamic_iou %.6f\nacc_relax %.6f\nacc_strict %.6f\n"
                "count_fd %lld\ncount_bs %lld\ncount_fs %lld\ncount_out_of_range %lld\n"
                "count_bg_dynamic %lld\n",
                epe_3way, epe_fd, epe_bs, epe_fs, epe_mean, dynamic_iou, acc_relax, acc_strict,
                static_cast<long long>(count_fd), static_cast<long long>(count_bs),
                static_cast<long long>(count_fs), static_cast<long long>(count_out),
                static_cast<long long>(bg_dynamic_count));
  return buf;
}

}  // namespace deflow
