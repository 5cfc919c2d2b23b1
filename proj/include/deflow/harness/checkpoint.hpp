// Copyright (c) 2026 deflow-cpp contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>

#include "deflow/network/model.hpp"

namespace deflow {

// Checkpoint wire format (little-endian):
//   "SFCK" | version u32 | config_len u32 | config JSON bytes
//   n_params u32, then per parameter in registration order:
//     name_len u32 | name bytes | rows u32 | cols u32 | rows*cols f32 row-major
inline constexpr uint32_t kCheckpointVersion = 1;

void write_checkpoint_blob(const std::filesystem::path& path, const std::string& config_json,
                           const std::vector<std::tuple<std::string, Eigen::Index, Eigen::Index,
                                                        std::vector<float>>>& arrays);

struct CheckpointBlob {
  std::string config_json;
  std::vector<std::tuple<std::string, Eigen::Index, Eigen::Index, std::vector<float>>> arrays;
};

CheckpointBlob read_checkpoint_blob(const std::filesystem::path& path);

// Atomic save: the blob is written to "<path>.tmp" and renamed over path.
template <typename T>
void save_checkpoint(const Model<T>& model, const std::string& config_json,
                     const std::filesystem::path& path) {
  std::vector<std::tuple<std::string, Eigen::Index, Eigen::Index, std::vector<float>>> arrays;
  arrays.reserve(model.params.count());
  for (size_t i = 0; i < model.params.count(); ++i) {
    const auto& b = model.params.block(i);
    std::vector<float> values;
    values.reserve(static_cast<size_t>(b.value.size()));
    for (Eigen::Index r = 0; r < b.value.rows(); ++r)
      for (Eigen::Index c = 0; c < b.value.cols(); ++c) values.push_back(static_cast<float>(b.value(r, c)));
    arrays.emplace_back(b.name, b.value.rows(), b.value.cols(), std::move(values));
  }
  write_checkpoint_blob(path, config_json, arrays);
}

// Fills an already-built model. Every stored array must match a registered
// block in name and shape, and every block must be covered.
template <typename T>
void load_checkpoint_params(Model<T>& model, const CheckpointBlob& blob,
                            const std::string& origin = "checkpoint") {
  if (blob.arrays.size() != model.params.count())
    throw ValidationError(origin + ": checkpoint holds " + std::to_string(blob.arrays.size()) +
                          " arrays, model has " + std::to_string(model.params.count()));
  for (const auto& [name, rows, cols, values] : blob.arrays) {
    if (!model.params.contains(name)) throw ValidationError(origin + ": unexpected array '" + name + "'");
    auto& b = model.params.at(name);
    if (b.value.rows() != rows || b.value.cols() != cols)
      throw ValidationError(origin + ": shape mismatch for '" + name + "' (" + std::to_string(rows) +
                            "x" + std::to_string(cols) + " vs model " + std::to_string(b.value.rows()) +
                            "x" + std::to_string(b.value.cols()) + ")");
    size_t k = 0;
    for (Eigen::Index r = 0; r < rows; ++r)
      for (Eigen::Index c = 0; c < cols; ++c) b.value(r, c) = static_cast<T>(values[k++]);
  }
}

}  // namespace deflow
