// Copyright (c) 2026 deflow-cpp contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "deflow/losses.hpp"
#include "deflow/network/model.hpp"
#include "deflow/synthdata.hpp"
#include "deflow/voxelizer.hpp"

namespace deflow {

struct TrainConfig {
  double lr = 1e-3;  // paper preset: 2e-6
  int batch_size = 2;
  int epochs = 4;
  int max_steps = 0;  // 0 = no cap
  int log_every = 10;
  int eval_every = 0;  // steps; 0 = only after training
  int checkpoint_every = 1;  // epochs
  double stop_epe_mean = 0.0;  // early stop once eval epe_mean drops below; 0 = off

  void validate() const;
};

struct MetricConfig {
  double dynamic_threshold = 0.05;
  double acc_relax = 0.1;
  double acc_strict = 0.05;

  void validate() const;
};

// The single declarative run configuration. Everything the pipeline consumes
// is reachable from here; presets fill in desk- or paper-scale values and a
// config file plus --key value overrides refine them.
struct RunConfig {
  GridConfig grid = GridConfig::desk_default();
  NetworkConfig network;
  LossConfig loss;
  TrainConfig train;
  MetricConfig metrics;
  SceneConfig scene;
  uint64_t seed = 0;
  std::string precision = "float32";  // float32 | float64
  bool deterministic = true;

  void validate() const;
};

// Paper-scale values for documentation: 512x512 grid at 0.2 m, lr 2e-6,
// batch 80, 50 epochs, 4 GRU iterations. Not runnable at desk scale.
RunConfig paper_preset();
RunConfig desk_preset();

// Strict parse: unknown keys anywhere are a validation error.
RunConfig parse_run_config(const std::string& json_text, const std::string& origin = "config");

RunConfig load_run_config(const std::filesystem::path& path);

// Applies dotted-path overrides ("train.lr=1e-4" as key "train.lr", value
// "1e-4") on top of a JSON document, then re-parses strictly.
RunConfig apply_overrides(const std::string& json_text,
                          const std::vector<std::pair<std::string, std::string>>& overrides,
                          const std::string& origin = "config");

std::string run_config_to_json(const RunConfig& cfg);

}  // namespace deflow
