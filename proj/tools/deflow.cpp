// Copyright (c) 2026 deflow-cpp contributors
// SPDX-License-Identifier: Apache-2.0
//
// Single entry point: generate / train / eval / bench / plot-flow / plot-hist.
// Exit codes: 0 success, 1 validation or I/O error, 2 numeric abort.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "deflow/dataio.hpp"
#include "deflow/harness/bench.hpp"
#include "deflow/harness/checkpoint.hpp"
#include "deflow/harness/config.hpp"
#include "deflow/harness/render.hpp"
#include "deflow/harness/trainer.hpp"
#include "deflow/synthdata.hpp"

namespace fs = std::filesystem;
using namespace deflow;

namespace {

struct ConfigArgs {
  std::string config_path;
  std::optional<uint64_t> seed;
  std::optional<bool> deterministic;
};

void add_config_options(CLI::App* sub, ConfigArgs* args) {
  sub->add_option("--config", args->config_path, "JSON run config (defaults to the desk preset)");
  sub->add_option("--seed", args->seed, "override the run seed");
  sub->add_flag(
      "--deterministic,!--no-deterministic",
      [args](int64_t count) { args->deterministic = count > 0; },
      "force deterministic mode on/off");
  sub->allow_extras();  // leftover --section.key value pairs become overrides
}

std::vector<std::pair<std::string, std::string>> collect_overrides(const CLI::App& sub) {
  const std::vector<std::string> extras = sub.remaining();
  std::vector<std::pair<std::string, std::string>> overrides;
  for (size_t i = 0; i < extras.size(); i += 2) {
    if (extras[i].rfind("--", 0) != 0)
      throw ValidationError("expected --section.key, got '" + extras[i] + "'");
    if (i + 1 >= extras.size()) throw ValidationError("missing value for override " + extras[i]);
    overrides.emplace_back(extras[i].substr(2), extras[i + 1]);
  }
  return overrides;
}

RunConfig resolve_config(const ConfigArgs& args, const CLI::App& sub) {
  std::string text;
  std::string origin = "defaults";
  if (!args.config_path.empty()) {
    std::ifstream in(args.config_path);
    if (!in) throw IoError(args.config_path + ": cannot open config");
    text.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
    origin = args.config_path;
  }
  RunConfig cfg = apply_overrides(text, collect_overrides(sub), origin);
  if (args.seed) cfg.seed = *args.seed;
  if (args.deterministic) cfg.deterministic = *args.deterministic;
  cfg.validate();
  return cfg;
}

int cmd_generate(const ConfigArgs& args, const CLI::App& sub, const std::string& out_dir, int count,
                 int val_count) {
  RunConfig cfg = resolve_config(args, sub);
  if (count < 1) throw ValidationError("generate: --count must be >= 1");
  if (val_count < 0) throw ValidationError("generate: --val-count must be >= 0");

  fs::create_directories(out_dir);
  std::vector<std::string> train_names, val_names;
  for (int i = 0; i < count + val_count; ++i) {
    SceneConfig scene = cfg.scene;
    scene.seed = cfg.seed + static_cast<uint64_t>(i);
    const FramePair pair = generate_frame_pair(scene, scene.seed);
    char name[32];
    std::snprintf(name, sizeof(name), "pair_%04d.sfpr", i);
    write_frame_pair(pair, fs::path(out_dir) / name);
    (i < count ? train_names : val_names).push_back(name);
  }

  std::ofstream manifest(fs::path(out_dir) / "manifest.json", std::ios::trunc);
  if (!manifest) throw IoError(out_dir + "/manifest.json: cannot write");
  manifest << "{\n  \"train\": [";
  for (size_t i = 0; i < train_names.size(); ++i)
    manifest << (i ? ", " : "") << '"' << train_names[i] << '"';
  manifest << "],\n  \"val\": [";
  for (size_t i = 0; i < val_names.size(); ++i)
    manifest << (i ? ", " : "") << '"' << val_names[i] << '"';
  manifest << "]\n}\n";
  manifest.close();

  std::ofstream cfg_out(fs::path(out_dir) / "generate_config.json", std::ios::trunc);
  cfg_out << run_config_to_json(cfg) << "\n";
  std::cout << "wrote " << (count + val_count) << " frame pairs to " << out_dir << "\n";
  return 0;
}

int cmd_train(const ConfigArgs& args, const CLI::App& sub, const std::string& data_dir,
              const std::string& out_dir) {
  const RunConfig cfg = resolve_config(args, sub);
  const TrainResult res = train_run(cfg, data_dir, out_dir);
  std::cout << "trained " << res.steps << " steps, final loss " << res.final_loss << "\n"
            << res.train_report.to_table();
  std::ofstream report(fs::path(out_dir) / "train_report.kv", std::ios::trunc);
  report << res.train_report.to_key_values();
  return 0;
}

int cmd_eval(const std::string& checkpoint, const std::string& data_dir, const std::string& split,
             const std::string& out_dir) {
  const EvalRunResult res = evaluate_run(checkpoint, data_dir, split);
  std::cout << res.mean.to_table();
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    std::ofstream table(fs::path(out_dir) / "report.txt", std::ios::trunc);
    table << res.mean.to_table();
    for (size_t i = 0; i < res.per_scene.size(); ++i)
      table << res.scene_names[i] << "\n" << res.per_scene[i].to_table();
    std::ofstream kv(fs::path(out_dir) / "report.kv", std::ios::trunc);
    kv << res.mean.to_key_values();
    if (!table || !kv) throw IoError(out_dir + ": cannot write reports");
  }
  return 0;
}

int cmd_bench(const ConfigArgs& args, const CLI::App& sub, int n_points, int repeats) {
  const RunConfig cfg = resolve_config(args, sub);
  const BenchReport report = bench_voxelizer(n_points, cfg.grid, repeats, cfg.seed);
  std::cout << format_bench_report(report);
  return 0;
}

MatrixX3<double> flow_for_plot(const FramePair& pair, const std::string& source,
                               const std::string& checkpoint) {
  const MatrixX3<double> pos = pair.cloud_t.positions.cast<double>();
  if (source == "ego") return ego_flow(pair.ego, pos);
  if (source == "gt") {
    if (!pair.cloud_t.gt_flow) throw ValidationError("plot-flow: pair carries no gt flow");
    return pair.cloud_t.gt_flow->cast<double>();
  }
  if (source == "pred") {
    if (checkpoint.empty()) throw ValidationError("plot-flow: --source pred needs --checkpoint");
    const CheckpointBlob blob = read_checkpoint_blob(checkpoint);
    const RunConfig cfg = parse_run_config(blob.config_json, checkpoint);
    if (cfg.precision == "float64") {
      Model<double> model = build_model<double>(cfg.network);
      load_checkpoint_params(model, blob, checkpoint);
      return model_forward(model, pair.cloud_t.cast<double>(), pair.cloud_t1.cast<double>(),
                           pair.ego, cfg.grid)
          .total();
    }
    Model<float> model = build_model<float>(cfg.network);
    load_checkpoint_params(model, blob, checkpoint);
    return model_forward(model, pair.cloud_t, pair.cloud_t1, pair.ego, cfg.grid)
        .total()
        .cast<double>();
  }
  throw ValidationError("plot-flow: --source must be gt, ego, or pred");
}

int cmd_plot_flow(const ConfigArgs& args, const CLI::App& sub, const std::string& pair_path,
                  const std::string& out_path, const std::string& source,
                  const std::string& checkpoint, double s_max) {
  const RunConfig cfg = resolve_config(args, sub);
  const FramePair pair = read_frame_pair(pair_path);
  RenderOptions opt;
  opt.s_max = s_max;
  render_bev_flow(pair, flow_for_plot(pair, source, checkpoint), out_path, cfg.grid, opt);
  std::cout << "wrote " << out_path << "\n";
  return 0;
}

int cmd_plot_hist(const std::string& data_dir, const std::string& pair_path,
                  const std::string& out_path, int bins) {
  if (bins < 1) throw ValidationError("plot-hist: --bins must be >= 1");
  std::vector<FramePair> pairs;
  if (!pair_path.empty()) {
    pairs.push_back(read_frame_pair(pair_path));
  } else if (!data_dir.empty()) {
    for (const auto& f : list_dataset(data_dir)) pairs.push_back(read_frame_pair(f));
  } else {
    throw ValidationError("plot-hist: pass --data or --pair");
  }
  if (pairs.empty()) throw ValidationError("plot-hist: no frame pairs found");

  double d_max = 0.0;
  for (const auto& pair : pairs) {
    if (!pair.cloud_t.gt_flow) throw ValidationError("plot-hist: pair carries no gt flow");
    const MatrixX3<double> delta = pair.cloud_t.gt_flow->cast<double>() -
                                   ego_flow(pair.ego, pair.cloud_t.positions.cast<double>());
    d_max = std::max(d_max, delta.rowwise().norm().maxCoeff());
  }
  const double lo = kDynamicThreshold;
  const double hi = std::max(d_max * (1.0 + 1e-9) + 1e-12, lo + 1e-6);
  std::vector<double> edges(static_cast<size_t>(bins) + 1);
  for (int b = 0; b <= bins; ++b) edges[static_cast<size_t>(b)] = lo + (hi - lo) * b / bins;

  const std::vector<int64_t> counts = motion_histogram(pairs, edges);
  write_ppm(render_histogram(counts, edges), out_path);
  int64_t total = 0;
  for (const int64_t c : counts) total += c;
  std::cout << "wrote " << out_path << " (" << total << " dynamic points, range [" << lo << ", "
            << hi << "] m)\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"deflow: pillar scene-flow pipeline"};
  app.require_subcommand(1);

  ConfigArgs gen_args, train_args, bench_args, plot_args;
  std::string out_dir, data_dir, checkpoint, split, pair_path, out_path, source = "gt";
  int count = 8, val_count = 0, n_points = 100000, repeats = 10, bins = 24;
  double s_max = 2.0;

  CLI::App* gen = app.add_subcommand("generate", "write a synthetic dataset");
  add_config_options(gen, &gen_args);
  gen->add_option("--out", out_dir, "output directory")->required();
  gen->add_option("--count", count, "training pairs to generate");
  gen->add_option("--val-count", val_count, "validation pairs to generate");

  CLI::App* train = app.add_subcommand("train", "train on a dataset directory");
  add_config_options(train, &train_args);
  train->add_option("--data", data_dir, "dataset directory")->required();
  train->add_option("--out", out_dir, "run output directory")->required();

  CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
  eval_cmd->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  eval_cmd->add_option("--data", data_dir, "dataset directory")->required();
  eval_cmd->add_option("--split", split, "manifest split name");
  eval_cmd->add_option("--out", out_dir, "report output directory");

  CLI::App* bench = app.add_subcommand("bench", "voxelizer micro-benchmark");
  add_config_options(bench, &bench_args);
  bench->add_option("--points", n_points, "points per repeat");
  bench->add_option("--repeats", repeats, "timing repeats");

  CLI::App* plot_flow = app.add_subcommand("plot-flow", "render a BEV flow image");
  add_config_options(plot_flow, &plot_args);
  plot_flow->add_option("--pair", pair_path, "frame-pair file")->required();
  plot_flow->add_option("--out", out_path, "output PPM path")->required();
  plot_flow->add_option("--source", source, "gt | ego | pred");
  plot_flow->add_option("--checkpoint", checkpoint, "checkpoint for --source pred");
  plot_flow->add_option("--smax", s_max, "flow magnitude at full saturation");

  CLI::App* plot_hist = app.add_subcommand("plot-hist", "render a motion histogram");
  plot_hist->add_option("--data", data_dir, "dataset directory");
  plot_hist->add_option("--pair", pair_path, "single frame-pair file");
  plot_hist->add_option("--out", out_path, "output PPM path")->required();
  plot_hist->add_option("--bins", bins, "histogram bins");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (gen->parsed()) return cmd_generate(gen_args, *gen, out_dir, count, val_count);
    if (train->parsed()) return cmd_train(train_args, *train, data_dir, out_dir);
    if (eval_cmd->parsed()) return cmd_eval(checkpoint, data_dir, split, out_dir);
    if (bench->parsed()) return cmd_bench(bench_args, *bench, n_points, repeats);
    if (plot_flow->parsed())
      return cmd_plot_flow(plot_args, *plot_flow, pair_path, out_path, source, checkpoint, s_max);
    if (plot_hist->parsed()) return cmd_plot_hist(data_dir, pair_path, out_path, bins);
  } catch (const NumericError& e) {
    std::cerr << "numeric abort: " << e.what() << "\n";
    return 2;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
