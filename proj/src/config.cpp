// Copyright (c) 2026 deflow-cpp contributors
// SPDX-License-Identifier: Apache-2.0

#include "deflow/harness/config.hpp"

#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "deflow/error.hpp"

namespace deflow {

using nlohmann::json;

void TrainConfig::validate() const {
  if (!(lr > 0.0)) throw ValidationError("train.lr must be positive");
  if (batch_size < 1) throw ValidationError("train.batch_size must be >= 1");
  if (epochs < 0) throw ValidationError("train.epochs must be >= 0");
  if (max_steps < 0) throw ValidationError("train.max_steps must be >= 0");
  if (log_every < 1) throw ValidationError("train.log_every must be >= 1");
  if (eval_every < 0) throw ValidationError("train.eval_every must be >= 0");
  if (checkpoint_every < 1) throw ValidationError("train.checkpoint_every must be >= 1");
  if (stop_epe_mean < 0.0) throw ValidationError("train.stop_epe_mean must be >= 0");
}

void MetricConfig::validate() const {
  if (!(dynamic_threshold > 0.0)) throw ValidationError("metrics.dynamic_threshold must be positive");
  if (!(acc_relax > 0.0) || !(acc_strict > 0.0))
    throw ValidationError("metrics accuracy thresholds must be positive");
}

void RunConfig::validate() const {
  grid.validate();
  network.validate();
  loss.validate();
  train.validate();
  metrics.validate();
  scene.validate();
  if (precision != "float32" && precision != "float64")
    throw ValidationError("precision must be float32 or float64");
}

RunConfig desk_preset() { return RunConfig{}; }

RunConfig paper_preset() {
  RunConfig cfg;
  cfg.grid = GridConfig::paper_default();
  cfg.train.lr = 2e-6;
  cfg.train.batch_size = 80;
  cfg.train.epochs = 50;
  cfg.network.decoder.gru_iters = 4;
  return cfg;
}

namespace {

[[noreturn]] void bad(const std::string& origin, const std::string& msg) {
  throw ValidationError(origin + ": " + msg);
}

void check_keys(const json& j, const std::string& origin, const std::string& section,
                const std::set<std::string>& allowed) {
  if (!j.is_object()) bad(origin, "section '" + section + "' must be an object");
  for (const auto& item : j.items()) {
    if (!allowed.count(item.key()))
      bad(origin, "unknown key '" + (section.empty() ? item.key() : section + "." + item.key()) + "'");
  }
}

double num(const json& j, const std::string& origin, const std::string& key) {
  if (!j.is_number()) bad(origin, "'" + key + "' must be a number");
  return j.get<double>();
}

int integer(const json& j, const std::string& origin, const std::string& key) {
  if (!j.is_number_integer()) bad(origin, "'" + key + "' must be an integer");
  return j.get<int>();
}

bool boolean(const json& j, const std::string& origin, const std::string& key) {
  if (!j.is_boolean()) bad(origin, "'" + key + "' must be a boolean");
  return j.get<bool>();
}

std::string text(const json& j, const std::string& origin, const std::string& key) {
  if (!j.is_string()) bad(origin, "'" + key + "' must be a string");
  return j.get<std::string>();
}

void parse_grid(const json& j, const std::string& origin, GridConfig* g) {
  check_keys(j, origin, "grid", {"extent_x", "extent_y", "resolution", "origin", "z_min", "z_max"});
  if (j.contains("extent_x")) g->extent_x = num(j["extent_x"], origin, "grid.extent_x");
  if (j.contains("extent_y")) g->extent_y = num(j["extent_y"], origin, "grid.extent_y");
  if (j.contains("resolution")) g->resolution = num(j["resolution"], origin, "grid.resolution");
  if (j.contains("origin")) {
    const auto& o = j["origin"];
    if (!o.is_array() || o.size() != 2) bad(origin, "'grid.origin' must be [x, y]");
    g->origin = {num(o[0], origin, "grid.origin[0]"), num(o[1], origin, "grid.origin[1]")};
  }
  if (j.contains("z_min")) g->z_min = num(j["z_min"], origin, "grid.z_min");
  if (j.contains("z_max")) g->z_max = num(j["z_max"], origin, "grid.z_max");
}

void parse_network(const json& j, const std::string& origin, NetworkConfig* n) {
  check_keys(j, origin, "network",
             {"encoder_channels", "unet_channels", "unet_out_channels", "leaky_slope"});
  if (j.contains("encoder_channels"))
    n->encoder_channels = integer(j["encoder_channels"], origin, "network.encoder_channels");
  if (j.contains("unet_channels")) {
    const auto& a = j["unet_channels"];
    if (!a.is_array() || a.empty()) bad(origin, "'network.unet_channels' must be a non-empty array");
    n->unet.channels.clear();
    for (size_t i = 0; i < a.size(); ++i)
      n->unet.channels.push_back(integer(a[i], origin, "network.unet_channels[]"));
  }
  if (j.contains("unet_out_channels"))
    n->unet.out_channels = integer(j["unet_out_channels"], origin, "network.unet_out_channels");
  if (j.contains("leaky_slope")) n->unet.leaky_slope = num(j["leaky_slope"], origin, "network.leaky_slope");
}

void parse_decoder(const json& j, const std::string& origin, DecoderConfig* d) {
  check_keys(j, origin, "decoder", {"variant", "gru_iters", "head_hidden", "leaky_slope"});
  if (j.contains("variant")) d->variant = parse_decoder_variant(text(j["variant"], origin, "decoder.variant"));
  if (j.contains("gru_iters")) d->gru_iters = integer(j["gru_iters"], origin, "decoder.gru_iters");
  if (j.contains("head_hidden")) d->head_hidden = integer(j["head_hidden"], origin, "decoder.head_hidden");
  if (j.contains("leaky_slope")) d->leaky_slope = num(j["leaky_slope"], origin, "decoder.leaky_slope");
}

void parse_loss(const json& j, const std::string& origin, LossConfig* l) {
  check_keys(j, origin, "loss", {"scheme", "speed_low", "speed_high", "dt"});
  if (j.contains("scheme")) l->scheme = parse_loss_scheme(text(j["scheme"], origin, "loss.scheme"));
  if (j.contains("speed_low")) l->low = num(j["speed_low"], origin, "loss.speed_low");
  if (j.contains("speed_high")) l->high = num(j["speed_high"], origin, "loss.speed_high");
  if (j.contains("dt")) l->dt = num(j["dt"], origin, "loss.dt");
}

void parse_train(const json& j, const std::string& origin, TrainConfig* t) {
  check_keys(j, origin, "train",
             {"lr", "batch_size", "epochs", "max_steps", "log_every", "eval_every", "checkpoint_every",
              "stop_epe_mean"});
  if (j.contains("lr")) t->lr = num(j["lr"], origin, "train.lr");
  if (j.contains("batch_size")) t->batch_size = integer(j["batch_size"], origin, "train.batch_size");
  if (j.contains("epochs")) t->epochs = integer(j["epochs"], origin, "train.epochs");
  if (j.contains("max_steps")) t->max_steps = integer(j["max_steps"], origin, "train.max_steps");
  if (j.contains("log_every")) t->log_every = integer(j["log_every"], origin, "train.log_every");
  if (j.contains("eval_every")) t->eval_every = integer(j["eval_every"], origin, "train.eval_every");
  if (j.contains("checkpoint_every"))
    t->checkpoint_every = integer(j["checkpoint_every"], origin, "train.checkpoint_every");
  if (j.contains("stop_epe_mean")) t->stop_epe_mean = num(j["stop_epe_mean"], origin, "train.stop_epe_mean");
}

void parse_metrics(const json& j, const std::string& origin, MetricConfig* m) {
  check_keys(j, origin, "metrics", {"dynamic_threshold", "acc_relax", "acc_strict"});
  if (j.contains("dynamic_threshold"))
    m->dynamic_threshold = num(j["dynamic_threshold"], origin, "metrics.dynamic_threshold");
  if (j.contains("acc_relax")) m->acc_relax = num(j["acc_relax"], origin, "metrics.acc_relax");
  if (j.contains("acc_strict")) m->acc_strict = num(j["acc_strict"], origin, "metrics.acc_strict");
}

void parse_scene(const json& j, const std::string& origin, SceneConfig* s) {
  check_keys(j, origin, "scene",
             {"n_background", "n_movers", "points_per_mover", "slow_fraction", "speed_slow_lo",
              "speed_slow_hi", "speed_fast_lo", "speed_fast_hi", "ego_translation_max", "ego_yaw_max",
              "extent", "dt", "target_buckets", "bucket_fractions", "seed"});
  if (j.contains("n_background")) s->n_background = integer(j["n_background"], origin, "scene.n_background");
  if (j.contains("n_movers")) s->n_movers = integer(j["n_movers"], origin, "scene.n_movers");
  if (j.contains("points_per_mover"))
    s->points_per_mover = integer(j["points_per_mover"], origin, "scene.points_per_mover");
  if (j.contains("slow_fraction")) s->slow_fraction = num(j["slow_fraction"], origin, "scene.slow_fraction");
  if (j.contains("speed_slow_lo")) s->speed_slow_lo = num(j["speed_slow_lo"], origin, "scene.speed_slow_lo");
  if (j.contains("speed_slow_hi")) s->speed_slow_hi = num(j["speed_slow_hi"], origin, "scene.speed_slow_hi");
  if (j.contains("speed_fast_lo")) s->speed_fast_lo = num(j["speed_fast_lo"], origin, "scene.speed_fast_lo");
  if (j.contains("speed_fast_hi")) s->speed_fast_hi = num(j["speed_fast_hi"], origin, "scene.speed_fast_hi");
  if (j.contains("ego_translation_max"))
    s->ego_translation_max = num(j["ego_translation_max"], origin, "scene.ego_translation_max");
  if (j.contains("ego_yaw_max")) s->ego_yaw_max = num(j["ego_yaw_max"], origin, "scene.ego_yaw_max");
  if (j.contains("extent")) s->extent = num(j["extent"], origin, "scene.extent");
  if (j.contains("dt")) s->dt = num(j["dt"], origin, "scene.dt");
  if (j.contains("target_buckets"))
    s->target_buckets = boolean(j["target_buckets"], origin, "scene.target_buckets");
  if (j.contains("bucket_fractions")) {
    const auto& a = j["bucket_fractions"];
    if (!a.is_array() || a.size() != 3) bad(origin, "'scene.bucket_fractions' must be [f1, f2, f3]");
    for (int i = 0; i < 3; ++i) s->bucket_fractions[i] = num(a[i], origin, "scene.bucket_fractions[]");
  }
  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned() && !j["seed"].is_number_integer())
      bad(origin, "'scene.seed' must be an integer");
    s->seed = j["seed"].get<uint64_t>();
  }
}

}  // namespace

RunConfig parse_run_config(const std::string& json_text, const std::string& origin) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    bad(origin, e.what());
  }
  check_keys(j, origin, "",
             {"preset", "grid", "network", "decoder", "loss", "train", "metrics", "scene", "seed",
              "precision", "deterministic"});

  RunConfig cfg;
  if (j.contains("preset")) {
    const std::string preset = text(j["preset"], origin, "preset");
    if (preset == "desk") {
      cfg = desk_preset();
    } else if (preset == "paper") {
      cfg = paper_preset();
    } else {
      bad(origin, "unknown preset '" + preset + "' (expected desk or paper)");
    }
  }
  if (j.contains("grid")) parse_grid(j["grid"], origin, &cfg.grid);
  if (j.contains("network")) parse_network(j["network"], origin, &cfg.network);
  if (j.contains("decoder")) parse_decoder(j["decoder"], origin, &cfg.network.decoder);
  if (j.contains("loss")) parse_loss(j["loss"], origin, &cfg.loss);
  if (j.contains("train")) parse_train(j["train"], origin, &cfg.train);
  if (j.contains("metrics")) parse_metrics(j["metrics"], origin, &cfg.metrics);
  if (j.contains("scene")) parse_scene(j["scene"], origin, &cfg.scene);
  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned() && !j["seed"].is_number_integer())
      bad(origin, "'seed' must be an integer");
    cfg.seed = j["seed"].get<uint64_t>();
  }
  if (j.contains("precision")) cfg.precision = text(j["precision"], origin, "precision");
  if (j.contains("deterministic")) cfg.deterministic = boolean(j["deterministic"], origin, "deterministic");
  cfg.validate();
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path.string() + ": cannot open config");
  std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_run_config(content, path.string());
}

RunConfig apply_overrides(const std::string& json_text,
                          const std::vector<std::pair<std::string, std::string>>& overrides,
                          const std::string& origin) {
  json j;
  try {
    j = json_text.empty() ? json::object() : json::parse(json_text);
  } catch (const json::exception& e) {
    bad(origin, e.what());
  }
  for (const auto& [key, value] : overrides) {
    if (key.empty()) bad(origin, "empty override key");
    json* node = &j;
    size_t start = 0;
    for (size_t dot = key.find('.'); dot != std::string::npos; dot = key.find('.', start)) {
      const std::string part = key.substr(start, dot - start);
      if (part.empty()) bad(origin, "bad override key '" + key + "'");
      node = &(*node)[part];
      if (!node->is_object() && !node->is_null()) bad(origin, "override '" + key + "' crosses a non-object");
      start = dot + 1;
    }
    json parsed;
    try {
      parsed = json::parse(value);
    } catch (const json::exception&) {
      parsed = value;  // bare words become strings
    }
    (*node)[key.substr(start)] = parsed;
  }
  return parse_run_config(j.dump(), origin);
}

std::string run_config_to_json(const RunConfig& cfg) {
  json j;
  j["grid"] = {{"extent_x", cfg.grid.extent_x},
               {"extent_y", cfg.grid.extent_y},
               {"resolution", cfg.grid.resolution},
               {"origin", {cfg.grid.origin.x(), cfg.grid.origin.y()}},
               {"z_min", cfg.grid.z_min},
               {"z_max", cfg.grid.z_max}};
  j["network"] = {{"encoder_channels", cfg.network.encoder_channels},
                  {"unet_channels", cfg.network.unet.channels},
                  {"unet_out_channels", cfg.network.unet.out_channels},
                  {"leaky_slope", cfg.network.unet.leaky_slope}};
  j["decoder"] = {{"variant", to_string(cfg.network.decoder.variant)},
                  {"gru_iters", cfg.network.decoder.gru_iters},
                  {"head_hidden", cfg.network.decoder.head_hidden},
                  {"leaky_slope", cfg.network.decoder.leaky_slope}};
  j["loss"] = {{"scheme", to_string(cfg.loss.scheme)},
               {"speed_low", cfg.loss.low},
               {"speed_high", cfg.loss.high},
               {"dt", cfg.loss.dt}};
  j["train"] = {{"lr", cfg.train.lr},
                {"batch_size", cfg.train.batch_size},
                {"epochs", cfg.train.epochs},
                {"max_steps", cfg.train.max_steps},
                {"log_every", cfg.train.log_every},
                {"eval_every", cfg.train.eval_every},
                {"checkpoint_every", cfg.train.checkpoint_every},
                {"stop_epe_mean", cfg.train.stop_epe_mean}};
  j["metrics"] = {{"dynamic_threshold", cfg.metrics.dynamic_threshold},
                  {"acc_relax", cfg.metrics.acc_relax},
                  {"acc_strict", cfg.metrics.acc_strict}};
  j["scene"] = {{"n_background", cfg.scene.n_background},
                {"n_movers", cfg.scene.n_movers},
                {"points_per_mover", cfg.scene.points_per_mover},
                {"slow_fraction", cfg.scene.slow_fraction},
                {"speed_slow_lo", cfg.scene.speed_slow_lo},
                {"speed_slow_hi", cfg.scene.speed_slow_hi},
                {"speed_fast_lo", cfg.scene.speed_fast_lo},
                {"speed_fast_hi", cfg.scene.speed_fast_hi},
                {"ego_translation_max", cfg.scene.ego_translation_max},
                {"ego_yaw_max", cfg.scene.ego_yaw_max},
                {"extent", cfg.scene.extent},
                {"dt", cfg.scene.dt},
                {"target_buckets", cfg.scene.target_buckets},
                {"bucket_fractions", cfg.scene.bucket_fractions},
                {"seed", cfg.scene.seed}};
  j["seed"] = cfg.seed;
  j["precision"] = cfg.precision;
  j["deterministic"] = cfg.deterministic;
  return j.dump(2);
}

}  // namespace deflow
