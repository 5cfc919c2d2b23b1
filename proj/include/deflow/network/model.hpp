// Copyright (c) 2026 deflow-cpp contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <string>

#include "deflow/error.hpp"
#include "deflow/geometry.hpp"
#include "deflow/network/decoder.hpp"
#include "deflow/network/params.hpp"
#include "deflow/network/unet.hpp"
#include "deflow/rng.hpp"
#include "deflow/types.hpp"
#include "deflow/voxelizer.hpp"

namespace deflow {

struct NetworkConfig {
  int encoder_channels = 32;
  UNetConfig unet;
  DecoderConfig decoder;

  // Channel count C of the hidden state M: U-Net features + pillar features.
  int hidden_channels() const { return unet.out_channels + encoder_channels; }

  void validate() const {
    if (encoder_channels <= 0) throw ValidationError("network: encoder_channels must be positive");
    unet.validate();
    decoder.validate();
  }
};

template <typename T>
Linear<T> make_linear(ParamRegistry<T>& reg, const std::string& name, Eigen::Index out, Eigen::Index in) {
  return {reg.add(name + ".w", out, in), reg.add(name + ".b", out, 1)};
}

template <typename T>
Conv2d<T> make_conv(ParamRegistry<T>& reg, const std::string& name, Eigen::Index c_out, Eigen::Index c_in,
                    int stride) {
  return {reg.add(name + ".w", c_out, c_in * 9), reg.add(name + ".b", c_out, 1), stride};
}

// Owns every parameter; layers hold pointers into the registry, so the model
// is movable but not copyable.
template <typename T>
struct Model {
  NetworkConfig cfg;
  ParamRegistry<T> params;
  Linear<T> pillar_linear;
  UNet<T> unet;
  Decoder<T> decoder;

  Model() = default;
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;
  Model(Model&&) = default;
  Model& operator=(Model&&) = default;
};

// Registers all blocks (zero-valued) and wires the layers. Registration order
// is fixed and defines the checkpoint layout.
template <typename T>
Model<T> build_model(const NetworkConfig& cfg) {
  cfg.validate();
  Model<T> m;
  m.cfg = cfg;
  auto& reg = m.params;

  m.pillar_linear = make_linear(reg, "pillar.linear", cfg.encoder_channels, kPointFeatureDim);

  m.unet.cfg = cfg.unet;
  const auto& ch = cfg.unet.channels;
  const int levels = cfg.unet.levels();
  m.unet.enc_in = make_conv(reg, "unet.enc_in", ch[0], cfg.encoder_channels, 1);
  for (int l = 1; l < levels; ++l) {
    m.unet.down.push_back(make_conv(reg, "unet.down" + std::to_string(l - 1), ch[l], ch[l - 1], 2));
    m.unet.enc.push_back(make_conv(reg, "unet.enc" + std::to_string(l - 1), ch[l], ch[l], 1));
  }
  m.unet.fuse = make_conv(reg, "unet.fuse", ch[levels - 1], 2 * ch[levels - 1], 1);
  m.unet.dec.resize(levels - 1);
  for (int l = 0; l < levels - 1; ++l) {
    m.unet.dec[l] = make_conv(reg, "unet.dec" + std::to_string(l), ch[l], ch[l + 1] + 2 * ch[l], 1);
  }
  m.unet.out = make_conv(reg, "unet.out", cfg.unet.out_channels, ch[0], 1);

  m.decoder.cfg = cfg.decoder;
  const int c = cfg.hidden_channels();
  const DecoderVariant variant = cfg.decoder.variant;
  if (variant == DecoderVariant::kDeflow || variant == DecoderVariant::kNoGru) {
    m.decoder.offset_expand = make_linear(reg, "decoder.expand", c, 3);
  }
  if (variant == DecoderVariant::kDeflow) {
    m.decoder.gru.update_gate = make_linear(reg, "decoder.gru.z", c, 2 * c);
    m.decoder.gru.reset_gate = make_linear(reg, "decoder.gru.r", c, 2 * c);
    m.decoder.gru.candidate = make_linear(reg, "decoder.gru.h", c, 2 * c);
  }
  const int head_in = variant == DecoderVariant::kNoGru ? 2 * c : c + 3;
  m.decoder.head1 = make_linear(reg, "decoder.head1", cfg.decoder.head_hidden, head_in);
  m.decoder.head2 = make_linear(reg, "decoder.head2", 3, cfg.decoder.head_hidden);
  return m;
}

// Kaiming-uniform weights (leaky-relu gain, a = 0.1), zero biases, except the
// GRU update gate whose bias starts at +1 so the first iterations stay close
// to identity refinement. Values are drawn in double in registration order,
// row-major, so a fixed seed reproduces the same init for any scalar type.
template <typename T>
void init_params(Model<T>& model, Rng& rng) {
  const double gain = std::sqrt(2.0 / (1.0 + 0.1 * 0.1));
  for (size_t bi = 0; bi < model.params.count(); ++bi) {
    auto& blk = model.params.block(bi);
    const bool is_weight = blk.name.size() >= 2 && blk.name.compare(blk.name.size() - 2, 2, ".w") == 0;
    if (!is_weight) {
      blk.value.setZero();
      continue;
    }
    const double bound = gain * std::sqrt(3.0 / static_cast<double>(blk.value.cols()));
    for (Eigen::Index r = 0; r < blk.value.rows(); ++r) {
      for (Eigen::Index c = 0; c < blk.value.cols(); ++c) {
        blk.value(r, c) = static_cast<T>(rng.uniform(-bound, bound));
      }
    }
  }
  if (model.params.contains("decoder.gru.z.b")) {
    model.params.at("decoder.gru.z.b").value.setConstant(T(1));
  }
}

template <typename T>
struct EncodedFrame {
  PillarAssignment assignment;
  MatrixX<T> features;    // N x kPointFeatureDim
  MatrixX<T> embeddings;  // N x C_enc, zero rows for out-of-range points
  ScatterMaxResult<T> scattered;
};

template <typename T>
EncodedFrame<T> encode_frame(const Model<T>& model, const MatrixX3<double>& positions,
                             const GridConfig& grid) {
  EncodedFrame<T> out;
  out.assignment = assign_pillars(positions, grid);
  out.features = compute_point_features(positions, out.assignment).template cast<T>();
  out.embeddings = model.pillar_linear.forward(out.features);
  for (Eigen::Index i = 0; i < out.assignment.size(); ++i) {
    if (!out.assignment.valid[i]) out.embeddings.row(i).setZero();
  }
  out.scattered = scatter_max_with_argmax(out.embeddings, out.assignment, grid);
  return out;
}

// Row i = concat(U-Net features at point i's pillar, point i's own pillar
// embedding). C = C_u + C_enc.
template <typename T>
MatrixX<T> build_hidden_state(const GridTensor<T>& unet_features, const MatrixX<T>& pillar_features,
                              const PillarAssignment& assignment) {
  if (pillar_features.rows() != assignment.size())
    throw ValidationError("build_hidden_state: pillar feature rows do not match assignment");
  return hconcat(gather_per_point(unet_features, assignment), pillar_features);
}

template <typename T>
struct ModelCache {
  GridConfig grid;
  EncodedFrame<T> frame_t, frame_t1;
  UNetCache<T> unet;
  GridTensor<T> unet_out;
  MatrixX<T> m;
  MatrixX<T> offsets;
  DecoderCache<T> decoder;
};

// Full pipeline of Fig.-3 shape: voxelize both frames, encode, run the shared
// backbone, decode a per-point residual for frame t, and add the ego flow.
// Out-of-range points get exactly zero residual.
template <typename T>
FlowEstimate<T> model_forward(const Model<T>& model, const PointCloud<T>& cloud_t,
                              const PointCloud<T>& cloud_t1, const RigidTransform& ego,
                              const GridConfig& grid, ModelCache<T>* cache = nullptr) {
  cloud_t.validate();
  cloud_t1.validate();
  ego.validate();
  grid.validate();
  ModelCache<T> local;
  if (!cache) cache = &local;
  cache->grid = grid;

  const MatrixX3<double> pos_t = cloud_t.positions.template cast<double>();
  const MatrixX3<double> pos_t1 = cloud_t1.positions.template cast<double>();
  cache->frame_t = encode_frame(model, pos_t, grid);
  cache->frame_t1 = encode_frame(model, pos_t1, grid);

  cache->unet_out = unet_forward(model.unet, cache->frame_t.scattered.image.features,
                                 cache->frame_t1.scattered.image.features, &cache->unet);
  cache->m = build_hidden_state(cache->unet_out, cache->frame_t.embeddings, cache->frame_t.assignment);
  cache->offsets = cache->frame_t.assignment.center_offset.template cast<T>();
  MatrixX<T> raw = decode_forward(model.decoder, cache->m, cache->offsets, &cache->decoder);

  FlowEstimate<T> est;
  est.residual = MatrixX3<T>::Zero(raw.rows(), 3);
  for (Eigen::Index i = 0; i < raw.rows(); ++i) {
    if (cache->frame_t.assignment.valid[i]) est.residual.row(i) = raw.row(i);
  }
  if (!est.residual.allFinite()) throw NumericError("model_forward: non-finite residual flow");
  est.ego = ego_flow(ego, pos_t).template cast<T>();
  return est;
}

// d_residual is the loss gradient w.r.t. the residual flow. Parameter grads
// accumulate into the registry; call params.zero_grads() between batches.
template <typename T>
void model_backward(Model<T>& model, const ModelCache<T>& cache, const MatrixX3<T>& d_residual) {
  MatrixX<T> d_raw = d_residual;
  for (Eigen::Index i = 0; i < d_raw.rows(); ++i) {
    if (!cache.frame_t.assignment.valid[i]) d_raw.row(i).setZero();
  }
  MatrixX<T> d_m = decode_backward(model.decoder, cache.decoder, d_raw);

  const Eigen::Index c_u = cache.unet_out.channels();
  MatrixX<T> d_gathered = d_m.leftCols(c_u);
  MatrixX<T> d_emb_t = d_m.rightCols(model.cfg.encoder_channels);
  GridTensor<T> d_unet_out = gather_backward(d_gathered, cache.frame_t.assignment, cache.grid);

  GridTensor<T> d_img_t, d_img_t1;
  unet_backward(model.unet, cache.unet, d_unet_out, &d_img_t, &d_img_t1);
  d_emb_t += scatter_max_backward(d_img_t.data, cache.frame_t.scattered.argmax,
                                  cache.frame_t.embeddings.rows());
  MatrixX<T> d_emb_t1 = scatter_max_backward(d_img_t1.data, cache.frame_t1.scattered.argmax,
                                             cache.frame_t1.embeddings.rows());

  model.pillar_linear.backward(cache.frame_t.features, d_emb_t);
  model.pillar_linear.backward(cache.frame_t1.features, d_emb_t1);
}

}  // namespace deflow
