// Copyright (c) 2026 deflow-cpp contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "deflow/geometry.hpp"

namespace deflow {

// The unit of training and evaluation: two sequential point clouds plus the
// ego transform between their frames. Point data is 32-bit (the wire format's
// native width); the ego transform stays 64-bit.
struct FramePair {
  PointCloudF cloud_t;    // carries gt_flow / foreground_mask when labeled
  PointCloudF cloud_t1;
  RigidTransform ego;     // frame-t coords -> frame-(t+1) coords

  bool has_gt_flow() const { return cloud_t.gt_flow.has_value(); }
  bool has_foreground_mask() const { return cloud_t.foreground_mask.has_value(); }

  void validate() const {
    cloud_t.validate();
    cloud_t1.validate();
    ego.validate();
  }
};

}  // namespace deflow
