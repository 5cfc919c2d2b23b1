// Copyright (c) 2026 deflow-cpp contributors
// SPDX-License-Identifier: Apache-2.0

#include "deflow/harness/trainer.hpp"

namespace deflow {

namespace {

std::vector<FramePair> load_pairs(const std::filesystem::path& dataset_dir, const std::string& split,
                                  std::vector<std::string>* names = nullptr) {
  const auto files = list_dataset(dataset_dir, split);
  if (files.empty())
    throw ValidationError(dataset_dir.string() + ": no frame pairs found" +
                          (split.empty() ? "" : " for split '" + split + "'"));
  std::vector<FramePair> pairs;
  pairs.reserve(files.size());
  for (const auto& f : files) {
    pairs.push_back(read_frame_pair(f));
    if (names) names->push_back(f.filename().string());
  }
  return pairs;
}

template <typename T>
EvalRunResult evaluate_blob_impl(const CheckpointBlob& blob, const RunConfig& cfg,
                                 const std::vector<FramePair>& pairs,
                                 std::vector<std::string> names) {
  Model<T> model = build_model<T>(cfg.network);
  load_checkpoint_params(model, blob);
  EvalRunResult out;
  out.scene_names = std::move(names);
  out.per_scene.reserve(pairs.size());
  for (const auto& pair : pairs) out.per_scene.push_back(evaluate_pair_with_model(model, pair, cfg));
  out.mean = mean_report(out.per_scene);
  return out;
}

}  // namespace

TrainResult train_pairs(const RunConfig& cfg, const std::vector<FramePair>& pairs,
                        const std::filesystem::path& out_dir) {
  if (cfg.precision == "float64") return train_pairs_impl<double>(cfg, pairs, out_dir);
  return train_pairs_impl<float>(cfg, pairs, out_dir);
}

TrainResult train_run(const RunConfig& cfg, const std::filesystem::path& dataset_dir,
                      const std::filesystem::path& out_dir) {
  return train_pairs(cfg, load_pairs(dataset_dir, ""), out_dir);
}

EvalRunResult evaluate_run(const std::filesystem::path& checkpoint_path,
                           const std::filesystem::path& dataset_dir, const std::string& split) {
  const CheckpointBlob blob = read_checkpoint_blob(checkpoint_path);
  const RunConfig cfg = parse_run_config(blob.config_json, checkpoint_path.string());
  std::vector<std::string> names;
  const std::vector<FramePair> pairs = load_pairs(dataset_dir, split, &names);
  if (cfg.precision == "float64") return evaluate_blob_impl<double>(blob, cfg, pairs, std::move(names));
  return evaluate_blob_impl<float>(blob, cfg, pairs, std::move(names));
}

}  // namespace deflow
