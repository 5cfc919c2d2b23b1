// Copyright (c) 2026 deflow-cpp contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <optional>
#include <sstream>

#include "deflow/error.hpp"
#include "deflow/types.hpp"

namespace deflow {

// Rigid body transform p -> R * p + t, 64-bit throughout. The ego transform
// carried by a frame pair maps frame-t coordinates of a world-static point to
// its frame-(t+1) coordinates, so a static world implies zero residual flow.
struct RigidTransform {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  static RigidTransform identity() { return {}; }

  static RigidTransform from_translation(const Eigen::Vector3d& t) {
    RigidTransform out;
    out.translation = t;
    return out;
  }

  // Yaw about +z, then translate.
  static RigidTransform from_yaw(double yaw_rad, const Eigen::Vector3d& t = Eigen::Vector3d::Zero()) {
    RigidTransform out;
    const double c = std::cos(yaw_rad);
    const double s = std::sin(yaw_rad);
    out.rotation << c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0;
    out.translation = t;
    return out;
  }

  Eigen::Matrix4d matrix() const {
    Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
    m.topLeftCorner<3, 3>() = rotation;
    m.topRightCorner<3, 1>() = translation;
    return m;
  }

  static RigidTransform from_matrix(const Eigen::Matrix4d& m, double tol = 1e-9) {
    RigidTransform out;
    out.rotation = m.topLeftCorner<3, 3>();
    out.translation = m.topRightCorner<3, 1>();
    out.validate(tol);
    return out;
  }

  // Orthonormal within tol, det(R) = +1 within tol.
  void validate(double tol = 1e-9) const {
    if (!rotation.allFinite() || !translation.allFinite()) {
      throw ValidationError("rigid transform has non-finite entries");
    }
    const double ortho_err = (rotation.transpose() * rotation - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
    if (ortho_err > tol) {
      std::ostringstream msg;
      msg << "rotation is not orthonormal (max |R'R - I| = " << ortho_err << ")";
      throw ValidationError(msg.str());
    }
    const double det_err = std::abs(rotation.determinant() - 1.0);
    if (det_err > tol) {
      std::ostringstream msg;
      msg << "rotation determinant deviates from +1 by " << det_err;
      throw ValidationError(msg.str());
    }
  }
};

// compose(a, b) maps p -> a(b(p)).
inline RigidTransform compose(const RigidTransform& a, const RigidTransform& b) {
  RigidTransform out;
  out.rotation = a.rotation * b.rotation;
  out.translation = a.rotation * b.translation + a.translation;
  return out;
}

inline RigidTransform invert(const RigidTransform& t) {
  RigidTransform out;
  out.rotation = t.rotation.transpose();
  out.translation = -(out.rotation * t.translation);
  return out;
}

// R * p + t per row; input unmodified.
inline MatrixX3<double> apply_transform(const RigidTransform& t, const MatrixX3<double>& points) {
  if (!points.allFinite()) {
    throw ValidationError("apply_transform: non-finite point coordinates");
  }
  return (points * t.rotation.transpose()).rowwise() + t.translation.transpose();
}

// Flow induced purely by the sensor's own motion: apply_transform(T, p) - p.
// Written exactly that way so ego_flow(T, p) + p == apply_transform(T, p)
// holds bitwise.
inline MatrixX3<double> ego_flow(const RigidTransform& t, const MatrixX3<double>& points) {
  return apply_transform(t, points) - points;
}

template <typename T>
struct PointCloud {
  MatrixX3<T> positions;
  std::optional<MatrixX3<T>> gt_flow;       // meters per frame interval
  std::optional<Mask> foreground_mask;
  std::optional<Mask> ground_mask;

  Eigen::Index size() const { return positions.rows(); }

  void validate() const {
    if (!positions.allFinite()) throw ValidationError("point cloud has non-finite positions");
    const Eigen::Index n = size();
    if (gt_flow && (gt_flow->rows() != n || !gt_flow->allFinite())) {
      throw ValidationError("gt_flow length/values inconsistent with positions");
    }
    if (foreground_mask && foreground_mask->size() != n) {
      throw ValidationError("foreground_mask length inconsistent with positions");
    }
    if (ground_mask && ground_mask->size() != n) {
      throw ValidationError("ground_mask length inconsistent with positions");
    }
  }

  // Drops every row whose ground_mask bit is set; ground points take part in
  // nothing downstream.
  PointCloud without_ground() const {
    if (!ground_mask) return *this;
    const Eigen::Index n = size();
    Eigen::Index kept = 0;
    for (Eigen::Index i = 0; i < n; ++i) kept += (*ground_mask)(i) ? 0 : 1;
    PointCloud out;
    out.positions.resize(kept, 3);
    if (gt_flow) out.gt_flow.emplace(kept, 3);
    if (foreground_mask) out.foreground_mask.emplace(kept);
    Eigen::Index j = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      if ((*ground_mask)(i)) continue;
      out.positions.row(j) = positions.row(i);
      if (gt_flow) out.gt_flow->row(j) = gt_flow->row(i);
      if (foreground_mask) (*out.foreground_mask)(j) = (*foreground_mask)(i);
      ++j;
    }
    return out;
  }

  template <typename U>
  PointCloud<U> cast() const {
    PointCloud<U> out;
    out.positions = positions.template cast<U>();
    if (gt_flow) out.gt_flow = gt_flow->template cast<U>();
    out.foreground_mask = foreground_mask;
    out.ground_mask = ground_mask;
    return out;
  }
};

using PointCloudF = PointCloud<float>;
using PointCloudD = PointCloud<double>;

// Predicted per-point flow split into the ego part and the network residual.
// The residual is the stored quantity; the total is derived so the identity
// total = ego + residual can never drift.
template <typename T>
struct FlowEstimate {
  MatrixX3<T> ego;
  MatrixX3<T> residual;

  MatrixX3<T> total() const { return ego + residual; }
};

}  // namespace deflow
