// Copyright (c) 2026 deflow-cpp contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "deflow/frame.hpp"

namespace deflow {

// FramePair wire format (all little-endian):
//   "SFPR" | version u32 | flags u32 | n_t u32 | n_t1 u32
//   ego 4x4 f64 row-major (128 bytes)
//   points_t n_t x 3 f32 row-major, points_t1 n_t1 x 3 f32
//   gt_flow n_t x 3 f32        (flags bit 0)
//   fg_mask n_t bytes, 0 or 1  (flags bit 1)
inline constexpr uint32_t kFramePairVersion = 1;
inline constexpr uint32_t kFlagGtFlow = 1u << 0;
inline constexpr uint32_t kFlagFgMask = 1u << 1;

// Ground points are dropped before writing; the format never stores them.
// The file is fsynced before close.
void write_frame_pair(const FramePair& pair, const std::filesystem::path& path);

FramePair read_frame_pair(const std::filesystem::path& path);

// All *.sfpr files in a directory, sorted lexicographically by filename. When
// `split` is non-empty, a manifest.json of the shape {"train": ["a.sfpr",...]}
// must exist and name the files of that split instead.
std::vector<std::filesystem::path> list_dataset(const std::filesystem::path& dir,
                                                const std::string& split = "");

}  // namespace deflow
