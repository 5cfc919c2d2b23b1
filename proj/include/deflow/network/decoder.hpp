// Copyright (c) 2026 deflow-cpp contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "deflow/error.hpp"
#include "deflow/network/layers.hpp"
#include "deflow/types.hpp"

namespace deflow {

enum class DecoderVariant { kDeflow, kFastflow3d, kNoGru };

inline std::string to_string(DecoderVariant v) {
  switch (v) {
    case DecoderVariant::kDeflow: return "deflow";
    case DecoderVariant::kFastflow3d: return "fastflow3d";
    case DecoderVariant::kNoGru: return "no_gru";
  }
  throw InternalError("bad decoder variant");
}

inline DecoderVariant parse_decoder_variant(const std::string& s) {
  if (s == "deflow") return DecoderVariant::kDeflow;
  if (s == "fastflow3d") return DecoderVariant::kFastflow3d;
  if (s == "no_gru") return DecoderVariant::kNoGru;
  throw ValidationError("unknown decoder variant: " + s);
}

struct DecoderConfig {
  DecoderVariant variant = DecoderVariant::kDeflow;
  int gru_iters = 4;
  int head_hidden = 32;
  double leaky_slope = 0.1;

  void validate() const {
    if (gru_iters < 1) throw ValidationError("decoder: gru_iters must be >= 1");
    if (head_hidden < 1) throw ValidationError("decoder: head_hidden must be >= 1");
    if (leaky_slope <= 0.0 || leaky_slope >= 1.0) throw ValidationError("decoder: leaky_slope must be in (0, 1)");
  }
};

// Gates are per-point linear maps over channels (a 1x1 convolution along the
// point axis), so no information crosses point rows.
template <typename T>
struct GruCell {
  Linear<T> update_gate;  // 2C -> C
  Linear<T> reset_gate;   // 2C -> C
  Linear<T> candidate;    // 2C -> C
};

template <typename T>
struct GruStepCache {
  MatrixX<T> h_prev;
  MatrixX<T> z, r;     // gate activations
  MatrixX<T> rhx;      // [r o h_prev, x]
  MatrixX<T> h_cand;   // tanh output
};

// H_t = Z_t o H_prev + (1 - Z_t) o H~_t, with
// Z = sigmoid(W_z [H, x]), R = sigmoid(W_r [H, x]), H~ = tanh(W_h [R o H, x]).
template <typename T>
MatrixX<T> gru_step(const GruCell<T>& cell, const MatrixX<T>& h_prev, const MatrixX<T>& x,
                    GruStepCache<T>* cache = nullptr, int iteration = 0) {
  if (h_prev.rows() != x.rows() || h_prev.cols() != x.cols())
    throw ValidationError("gru_step: H and x shapes must match");
  MatrixX<T> zin = hconcat(h_prev, x);
  MatrixX<T> z = sigmoid(MatrixX<T>(cell.update_gate.forward(zin)));
  MatrixX<T> r = sigmoid(MatrixX<T>(cell.reset_gate.forward(zin)));
  MatrixX<T> rhx = hconcat(MatrixX<T>(r.cwiseProduct(h_prev)), x);
  MatrixX<T> h_cand = tanh_act(MatrixX<T>(cell.candidate.forward(rhx)));
  MatrixX<T> h = z.cwiseProduct(h_prev) + (MatrixX<T>::Ones(z.rows(), z.cols()) - z).cwiseProduct(h_cand);
  if (!h.allFinite())
    throw NumericError("gru_step: non-finite hidden state at iteration " + std::to_string(iteration));
  if (cache) {
    cache->h_prev = h_prev;
    cache->z = std::move(z);
    cache->r = std::move(r);
    cache->rhx = std::move(rhx);
    cache->h_cand = std::move(h_cand);
  }
  return h;
}

// Backward through one step. d_h is the gradient w.r.t. the step output;
// returns the gradient w.r.t. h_prev and accumulates into d_x.
template <typename T>
MatrixX<T> gru_step_backward(GruCell<T>& cell, const GruStepCache<T>& c, const MatrixX<T>& d_h,
                             MatrixX<T>& d_x) {
  const Eigen::Index ch = c.h_prev.cols();
  MatrixX<T> d_z = d_h.cwiseProduct(c.h_prev - c.h_cand);
  MatrixX<T> d_cand = d_h.cwiseProduct(MatrixX<T>(MatrixX<T>::Ones(d_h.rows(), d_h.cols()) - c.z));
  MatrixX<T> d_h_prev = d_h.cwiseProduct(c.z);

  MatrixX<T> d_cand_pre = tanh_backward(c.h_cand, d_cand);
  MatrixX<T> d_rhx = cell.candidate.backward(c.rhx, d_cand_pre);
  MatrixX<T> d_rh = d_rhx.leftCols(ch);
  d_x += d_rhx.rightCols(ch);
  MatrixX<T> d_r = d_rh.cwiseProduct(c.h_prev);
  d_h_prev += d_rh.cwiseProduct(c.r);

  MatrixX<T> zin = hconcat(c.h_prev, MatrixX<T>(c.rhx.rightCols(ch)));
  MatrixX<T> d_zin = cell.update_gate.backward(zin, sigmoid_backward(c.z, d_z));
  d_zin += cell.reset_gate.backward(zin, sigmoid_backward(c.r, d_r));
  d_h_prev += d_zin.leftCols(ch);
  d_x += d_zin.rightCols(ch);
  return d_h_prev;
}

template <typename T>
struct Decoder {
  DecoderConfig cfg;
  Linear<T> offset_expand;  // 3 -> C (deflow, no_gru)
  GruCell<T> gru;           // deflow only
  Linear<T> head1;          // variant-dependent input -> head_hidden
  Linear<T> head2;          // head_hidden -> 3
};

template <typename T>
struct DecoderCache {
  MatrixX<T> m;
  MatrixX<T> offsets;
  MatrixX<T> x;  // expanded offsets, post-tanh
  std::vector<GruStepCache<T>> steps;
  MatrixX<T> head_in;
  MatrixX<T> hidden_a;  // post-leaky-relu head hidden
};

template <typename T>
MatrixX<T> decode_forward(const Decoder<T>& dec, const MatrixX<T>& m, const MatrixX<T>& offsets,
                          DecoderCache<T>* cache) {
  if (offsets.cols() != 3) throw ValidationError("decoder: offsets must be N x 3");
  if (m.rows() != offsets.rows()) throw ValidationError("decoder: M and offsets row counts differ");
  cache->m = m;
  cache->offsets = offsets;
  cache->steps.clear();

  MatrixX<T> head_in;
  switch (dec.cfg.variant) {
    case DecoderVariant::kDeflow: {
      cache->x = tanh_act(MatrixX<T>(dec.offset_expand.forward(offsets)));
      MatrixX<T> h = m;
      cache->steps.resize(dec.cfg.gru_iters);
      for (int i = 0; i < dec.cfg.gru_iters; ++i) {
        h = gru_step(dec.gru, h, cache->x, &cache->steps[i], i);
      }
      head_in = hconcat(h, offsets);
      break;
    }
    case DecoderVariant::kFastflow3d:
      head_in = hconcat(m, offsets);
      break;
    case DecoderVariant::kNoGru:
      cache->x = tanh_act(MatrixX<T>(dec.offset_expand.forward(offsets)));
      head_in = hconcat(m, cache->x);
      break;
  }
  cache->head_in = head_in;
  cache->hidden_a = leaky_relu(MatrixX<T>(dec.head1.forward(head_in)), static_cast<T>(dec.cfg.leaky_slope));
  return dec.head2.forward(cache->hidden_a);
}

// Returns the gradient w.r.t. M. Offsets are data, not parameters, so their
// gradient is dropped after the expansion layer has collected its own.
template <typename T>
MatrixX<T> decode_backward(Decoder<T>& dec, const DecoderCache<T>& cache, const MatrixX<T>& d_out) {
  const T slope = static_cast<T>(dec.cfg.leaky_slope);
  MatrixX<T> d_hidden = dec.head2.backward(cache.hidden_a, d_out);
  d_hidden = leaky_relu_backward(cache.hidden_a, d_hidden, slope);
  MatrixX<T> d_head_in = dec.head1.backward(cache.head_in, d_hidden);

  const Eigen::Index ch = cache.m.cols();
  switch (dec.cfg.variant) {
    case DecoderVariant::kDeflow: {
      MatrixX<T> d_h = d_head_in.leftCols(ch);
      MatrixX<T> d_x = MatrixX<T>::Zero(cache.x.rows(), cache.x.cols());
      for (int i = static_cast<int>(cache.steps.size()) - 1; i >= 0; --i) {
        d_h = gru_step_backward(dec.gru, cache.steps[i], d_h, d_x);
      }
      MatrixX<T> d_x_pre = tanh_backward(cache.x, d_x);
      dec.offset_expand.backward(cache.offsets, d_x_pre);
      return d_h;
    }
    case DecoderVariant::kFastflow3d:
      return d_head_in.leftCols(ch);
    case DecoderVariant::kNoGru: {
      MatrixX<T> d_x = d_head_in.rightCols(cache.x.cols());
      MatrixX<T> d_x_pre = tanh_backward(cache.x, d_x);
      dec.offset_expand.backward(cache.offsets, d_x_pre);
      return d_head_in.leftCols(ch);
    }
  }
  throw InternalError("bad decoder variant");
}

}  // namespace deflow
