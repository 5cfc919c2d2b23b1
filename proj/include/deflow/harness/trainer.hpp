// Copyright (c) 2026 deflow-cpp contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

#include "deflow/dataio.hpp"
#include "deflow/harness/adam.hpp"
#include "deflow/harness/checkpoint.hpp"
#include "deflow/harness/config.hpp"
#include "deflow/losses.hpp"
#include "deflow/metrics.hpp"
#include "deflow/network/model.hpp"

namespace deflow {

struct TrainResult {
  int steps = 0;
  double final_loss = 0.0;
  EvalReport train_report;  // final evaluation over the training pairs
  std::filesystem::path checkpoint_path;
};

template <typename T>
EvalReport evaluate_pair_with_model(const Model<T>& model, const FramePair& pair,
                                    const RunConfig& cfg) {
  if (!pair.cloud_t.gt_flow || !pair.cloud_t.foreground_mask)
    throw ValidationError("evaluate: frame pair lacks gt flow or foreground mask");
  ModelCache<T> cache;
  const FlowEstimate<T> est = model_forward(model, pair.cloud_t.template cast<T>(),
                                            pair.cloud_t1.template cast<T>(), pair.ego, cfg.grid, &cache);
  const MatrixX3<double> pred = est.total().template cast<double>();
  const MatrixX3<double> gt = pair.cloud_t.gt_flow->template cast<double>();
  const MatrixX3<double> ego = ego_flow(pair.ego, pair.cloud_t.positions.template cast<double>());
  const Mask in_range = cache.frame_t.assignment.valid;
  return evaluate_scene(pred, gt, ego, *pair.cloud_t.foreground_mask, cfg.metrics.dynamic_threshold,
                        &in_range, cfg.metrics.acc_relax, cfg.metrics.acc_strict);
}

template <typename T>
EvalReport evaluate_pairs_with_model(const Model<T>& model, const std::vector<FramePair>& pairs,
                                     const RunConfig& cfg) {
  std::vector<EvalReport> reports;
  reports.reserve(pairs.size());
  for (const auto& pair : pairs) reports.push_back(evaluate_pair_with_model(model, pair, cfg));
  return mean_report(reports);
}

namespace detail {

inline std::string eval_log_fields(const EvalReport& r) {
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "{\"epe_3way\":%.9g,\"epe_fd\":%.9g,\"epe_bs\":%.9g,\"epe_fs\":%.9g,"
                "\"epe_mean\":%.9g,\"dynamic_iou\":%.9g,\"acc_relax\":%.9g,\"acc_strict\":%.9g}",
                r.epe_3way, r.epe_fd, r.epe_bs, r.epe_fs, r.epe_mean, r.dynamic_iou, r.acc_relax,
                r.acc_strict);
  return buf;
}

}  // namespace detail

// Full training loop over in-memory pairs. When out_dir is non-empty it
// writes an initial checkpoint, periodic atomic checkpoints, a final one, and
// an append-only JSONL log. A non-finite loss aborts with a numeric error;
// the last checkpoint on disk stays intact.
template <typename T>
TrainResult train_pairs_impl(const RunConfig& cfg, const std::vector<FramePair>& pairs,
                             const std::filesystem::path& out_dir) {
  cfg.validate();
  if (pairs.empty()) throw ValidationError("train: dataset is empty");
  for (const auto& p : pairs) {
    p.validate();
    if (!p.cloud_t.gt_flow || !p.cloud_t.foreground_mask)
      throw ValidationError("train: every training pair needs gt flow and a foreground mask");
  }

  Model<T> model = build_model<T>(cfg.network);
  Rng rng(cfg.seed);
  init_params(model, rng);
  Adam<T> opt;
  opt.lr = cfg.train.lr;
  opt.init(model.params);

  const std::string cfg_json = run_config_to_json(cfg);
  std::ofstream log;
  TrainResult res;
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    const auto log_path = out_dir / "train_log.jsonl";
    log.open(log_path, std::ios::trunc);
    if (!log) throw IoError(log_path.string() + ": cannot open log");
    res.checkpoint_path = out_dir / "model.sfck";
    save_checkpoint(model, cfg_json, res.checkpoint_path);
  }

  struct Sample {
    PointCloud<T> ct, ct1;
    RigidTransform ego;
    ResidualTargets<T> targets;
  };
  std::vector<Sample> samples;
  samples.reserve(pairs.size());
  for (const auto& pair : pairs) {
    Sample s;
    s.ct = pair.cloud_t.template cast<T>();
    s.ct1 = pair.cloud_t1.template cast<T>();
    s.ego = pair.ego;
    const MatrixX3<T> ego_f =
        ego_flow(pair.ego, pair.cloud_t.positions.template cast<double>()).template cast<T>();
    s.targets = make_residual_targets<T>(pair.cloud_t.gt_flow->template cast<T>(), ego_f,
                                         *pair.cloud_t.foreground_mask, cfg.loss.dt);
    samples.push_back(std::move(s));
  }

  Rng order_rng = Rng(cfg.seed).fork(1);
  const auto t0 = std::chrono::steady_clock::now();
  auto wall_ms = [&]() -> double {
    if (cfg.deterministic) return 0.0;
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  };

  int step = 0;
  bool done = false;
  for (int epoch = 0; epoch < cfg.train.epochs && !done; ++epoch) {
    std::vector<size_t> order(samples.size());
    std::iota(order.begin(), order.end(), size_t{0});
    for (size_t i = order.size(); i > 1; --i) {
      const size_t j = static_cast<size_t>(order_rng.uniform_int(0, static_cast<int64_t>(i) - 1));
      std::swap(order[i - 1], order[j]);
    }

    for (size_t at = 0; at < order.size() && !done; at += static_cast<size_t>(cfg.train.batch_size)) {
      const size_t take = std::min(static_cast<size_t>(cfg.train.batch_size), order.size() - at);
      model.params.zero_grads();
      double loss_sum = 0.0;
      for (size_t k = 0; k < take; ++k) {
        const Sample& s = samples[order[at + k]];
        ModelCache<T> cache;
        const FlowEstimate<T> est = model_forward(model, s.ct, s.ct1, s.ego, cfg.grid, &cache);
        MatrixX3<T> grad;
        const T loss = loss_with_grad(est.residual, s.targets, cfg.loss, &grad);
        if (!std::isfinite(static_cast<double>(loss)))
          throw NumericError("train: non-finite loss at step " + std::to_string(step + 1));
        grad *= T(1) / static_cast<T>(take);
        model_backward(model, cache, MatrixX3<T>(grad));
        loss_sum += static_cast<double>(loss);
      }
      opt.step(model.params);
      ++step;
      res.final_loss = loss_sum / static_cast<double>(take);

      if (log.is_open() && (step == 1 || step % cfg.train.log_every == 0)) {
        char line[192];
        std::snprintf(line, sizeof(line), "{\"step\":%d,\"epoch\":%d,\"loss\":%.9g,\"wall_ms\":%.3f}\n",
                      step, epoch, res.final_loss, wall_ms());
        log << line;
      }
      if (cfg.train.eval_every > 0 && step % cfg.train.eval_every == 0) {
        const EvalReport r = evaluate_pairs_with_model(model, pairs, cfg);
        if (log.is_open())
          log << "{\"step\":" << step << ",\"eval\":" << detail::eval_log_fields(r) << "}\n";
        if (cfg.train.stop_epe_mean > 0.0 && r.epe_mean < cfg.train.stop_epe_mean) done = true;
      }
      if (cfg.train.max_steps > 0 && step >= cfg.train.max_steps) done = true;
    }

    if (!res.checkpoint_path.empty() && (epoch + 1) % cfg.train.checkpoint_every == 0)
      save_checkpoint(model, cfg_json, res.checkpoint_path);
  }

  if (!res.checkpoint_path.empty()) save_checkpoint(model, cfg_json, res.checkpoint_path);
  res.steps = step;
  res.train_report = evaluate_pairs_with_model(model, pairs, cfg);
  if (log.is_open())
    log << "{\"step\":" << step << ",\"final_eval\":" << detail::eval_log_fields(res.train_report)
        << "}\n";
  return res;
}

// Precision-dispatching wrappers.
TrainResult train_pairs(const RunConfig& cfg, const std::vector<FramePair>& pairs,
                        const std::filesystem::path& out_dir = {});
TrainResult train_run(const RunConfig& cfg, const std::filesystem::path& dataset_dir,
                      const std::filesystem::path& out_dir);

struct EvalRunResult {
  EvalReport mean;
  std::vector<EvalReport> per_scene;
  std::vector<std::string> scene_names;
};

EvalRunResult evaluate_run(const std::filesystem::path& checkpoint_path,
                           const std::filesystem::path& dataset_dir, const std::string& split = "");

}  // namespace deflow
