// Copyright (c) 2026 The TimeCMA-cpp Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// TimeCMA forecaster.
//
// All internal activations are token-major: row i is variable i. The
// [channels × variables] matrices of the usual notation are the transposes
// of what is stored here.
//
//   X (T×N) ─ inverted embed ─▶ H (N×C) ─ TS encoder ─▶ H̄ (N×C) ───────┐
//   L (N×E) ─ E→E projection ─ prompt encoder ─▶ L̄ (N×E) ─▶ align ◀──┘
//   align ─▶ H̄_C (N×C) ─ decoder ─▶ (N×C) ─ projection ─▶ X̂ (M×N)

#pragma once

#include <span>
#include <string>
#include <vector>

#include "timecma/blocks.hpp"
#include "timecma/data.hpp"
#include "timecma/params.hpp"
#include "timecma/tensor.hpp"

namespace timecma {

/// Sum of squared weight matrices; biases and norm parameters excluded.
inline Tensor l2_penalty(const ParamRegistry& params) {
  Tensor total;
  for (const auto& e : params) {
    if (e.kind != ParamKind::Weight) continue;
    const Tensor sq = sum_squares(e.value);
    total = total.defined() ? add(total, sq) : sq;
  }
  return total.defined() ? total : Tensor::scalar(0.0f);
}

struct ModelConfig {
  std::size_t num_variables = 7;
  std::size_t lookback = 36;
  std::size_t horizon = 24;
  std::size_t ts_dim = 64;      // C
  std::size_t prompt_dim = 64;  // E
  std::size_t layers_ts = 1;
  std::size_t layers_prompt = 1;
  std::size_t layers_dec = 1;
  std::size_t heads = 8;
  std::size_t ffn_ratio = 4;
  float lambda = 1e-5f;
  // Ablation switches.
  bool use_alignment = true;  // false drops the whole prompt branch
  bool use_prompt_projection = true;
  bool causal_decoder = true;

  void validate() const {
    if (num_variables == 0 || lookback == 0 || horizon == 0 || ts_dim == 0 || prompt_dim == 0) {
      throw ValidationError("model config: N, T, M, C and E must be positive");
    }
    if (heads == 0 || ts_dim % heads != 0 || prompt_dim % heads != 0) {
      throw ValidationError("model config: C=" + std::to_string(ts_dim) + " and E=" +
                            std::to_string(prompt_dim) + " must be divisible by heads=" +
                            std::to_string(heads));
    }
    if (ffn_ratio == 0) throw ValidationError("model config: ffn_ratio must be positive");
    if (lambda < 0.0f) throw ValidationError("model config: lambda must be non-negative");
  }
};

/// Intermediate matrices captured during a forward pass.
struct ForwardTrace {
  std::vector<std::vector<Tensor>> ts_attention;      // per layer, per head [N×N]
  std::vector<std::vector<Tensor>> prompt_attention;  // per layer, per head [N×N]
  Tensor similarity;                                  // [C×E]
};

class TimeCMA {
 public:
  TimeCMA(ModelConfig config, std::uint64_t seed) : config_(config), params_(seed) {
    config_.validate();
    build();
  }

  TimeCMA(const TimeCMA&) = delete;
  TimeCMA& operator=(const TimeCMA&) = delete;
  TimeCMA(TimeCMA&&) = default;
  TimeCMA& operator=(TimeCMA&&) = default;

  const ModelConfig& config() const { return config_; }
  ParamRegistry& params() { return params_; }
  const ParamRegistry& params() const { return params_; }
  std::size_t count_params() const { return params_.count_scalars(); }

  // Sub-blocks, exposed for targeted tests and ablations.
  std::vector<PreLNBlock>& ts_blocks() { return ts_blocks_; }
  std::vector<PreLNBlock>& prompt_blocks() { return prompt_blocks_; }
  std::vector<DecoderBlock>& decoder_blocks() { return decoder_blocks_; }

  /// X (T×N, normalized) → N×C: one shared T→C map per variable history.
  Tensor inverted_embed(const Tensor& x) const {
    if (x.rank() != 2 || x.dim(0) != config_.lookback) {
      throw DimensionError("inverted_embed: expected T=" + std::to_string(config_.lookback) +
                           " rows, got " + shape_str(x.shape()));
    }
    return linear(transpose(x), embed_w_, embed_b_);
  }

  Tensor ts_encode(const Tensor& h, ForwardTrace* trace = nullptr) const {
    Tensor out = h;
    for (const auto& b : ts_blocks_) {
      std::vector<Tensor> attn;
      out = pre_ln_encoder_layer(out, b, trace ? &attn : nullptr);
      if (trace) trace->ts_attention.push_back(std::move(attn));
    }
    return out;
  }

  /// L (N×E) → L̄ (N×E).
  Tensor prompt_encode(const Tensor& l, ForwardTrace* trace = nullptr) const {
    if (!config_.use_alignment) throw UsageError("prompt branch disabled in this config");
    if (l.rank() != 2 || l.dim(1) != config_.prompt_dim) {
      throw DimensionError("prompt_encode: expected E=" + std::to_string(config_.prompt_dim) +
                           " columns, got " + shape_str(l.shape()));
    }
    Tensor out = config_.use_prompt_projection ? linear(l, prompt_proj_w_, prompt_proj_b_) : l;
    for (const auto& b : prompt_blocks_) {
      std::vector<Tensor> attn;
      out = pre_ln_encoder_layer(out, b, trace ? &attn : nullptr);
      if (trace) trace->prompt_attention.push_back(std::move(attn));
    }
    return out;
  }

  /// Channel-wise cross-modality alignment.
  ///   S = softmax_E(ψ_q(H̄)ᵀ · ψ_k(L̄))          [C×E], contraction over variables
  ///   H̄_C = ω(ψ_v(L̄) · Sᵀ) + H̄                 [N×C]
  Tensor align(const Tensor& h_bar, const Tensor& l_bar, ForwardTrace* trace = nullptr) const {
    if (!config_.use_alignment) throw UsageError("alignment disabled in this config");
    if (h_bar.rank() != 2 || l_bar.rank() != 2 || h_bar.dim(0) != l_bar.dim(0) ||
        h_bar.dim(1) != config_.ts_dim || l_bar.dim(1) != config_.prompt_dim) {
      throw DimensionError("align: shapes " + shape_str(h_bar.shape()) + " and " +
                           shape_str(l_bar.shape()) + " are inconsistent with C=" +
                           std::to_string(config_.ts_dim) + ", E=" + std::to_string(config_.prompt_dim));
    }
    const Tensor q = linear(h_bar, align_.q_weight, align_.q_bias);
    const Tensor k = linear(l_bar, align_.k_weight, align_.k_bias);
    const Tensor v = linear(l_bar, align_.v_weight, align_.v_bias);
    const Tensor similarity = softmax(matmul(transpose(q), k), 1);
    if (trace) trace->similarity = similarity;
    const Tensor gathered = matmul(v, transpose(similarity));
    return add(linear(gathered, align_.o_weight, align_.o_bias), h_bar);
  }

  /// Decoder layers; cross-attention keys/values come from the aligned input.
  Tensor decode(const Tensor& h_c) const {
    Tensor out = h_c;
    for (const auto& b : decoder_blocks_) out = pre_ln_decoder_layer(out, h_c, b);
    return out;
  }

  /// N×C → M×N normalized forecast via a shared C→M map.
  Tensor project(const Tensor& h_dec) const {
    return transpose(linear(h_dec, proj_w_, proj_b_));
  }

  /// Normalized lookback (T×N) and prompt embeddings (N×E) → normalized forecast (M×N).
  Tensor forward(const Tensor& x_norm, const Tensor& prompt, ForwardTrace* trace = nullptr) const {
    Tensor h = ts_encode(inverted_embed(x_norm), trace);
    if (config_.use_alignment) h = align(h, prompt_encode(prompt, trace), trace);
    return project(decode(h));
  }

  /// Denormalized M×N forecast for a raw window.
  std::vector<float> predict(const TimeSeriesWindow& window, std::span<const float> prompt) const {
    NoGradGuard no_grad;
    const TimeSeriesWindow norm = revin_normalize(window);
    const Tensor x = Tensor::matrix(norm.lookback_len, norm.num_variables, norm.lookback);
    const Tensor p = Tensor::matrix(window.num_variables, config_.prompt_dim,
                                    std::vector<float>(prompt.begin(), prompt.end()));
    return revin_denormalize(forward(x, p).to_vector(), window.horizon, window.stats);
  }

  Tensor regularization() const { return l2_penalty(params_); }

 private:
  struct AlignWeights {
    Tensor q_weight, q_bias, k_weight, k_bias, v_weight, v_bias, o_weight, o_bias;
  };

  void build() {
    const auto& c = config_;
    embed_w_ = params_.add_weight("embed.weight", c.ts_dim, c.lookback);
    embed_b_ = params_.add_bias("embed.bias", c.ts_dim);
    for (std::size_t i = 0; i < c.layers_ts; ++i) {
      ts_blocks_.push_back(PreLNBlock::create(params_, "ts_encoder." + std::to_string(i), c.ts_dim, c.heads,
                                              c.ffn_ratio * c.ts_dim));
    }
    if (c.use_alignment) {
      if (c.use_prompt_projection) {
        prompt_proj_w_ = params_.add_weight("prompt_proj.weight", c.prompt_dim, c.prompt_dim);
        prompt_proj_b_ = params_.add_bias("prompt_proj.bias", c.prompt_dim);
      }
      for (std::size_t i = 0; i < c.layers_prompt; ++i) {
        prompt_blocks_.push_back(PreLNBlock::create(params_, "prompt_encoder." + std::to_string(i),
                                                    c.prompt_dim, c.heads, c.ffn_ratio * c.prompt_dim));
      }
      align_.q_weight = params_.add_weight("align.q.weight", c.ts_dim, c.ts_dim);
      align_.q_bias = params_.add_bias("align.q.bias", c.ts_dim);
      align_.k_weight = params_.add_weight("align.k.weight", c.prompt_dim, c.prompt_dim);
      align_.k_bias = params_.add_bias("align.k.bias", c.prompt_dim);
      align_.v_weight = params_.add_weight("align.v.weight", c.prompt_dim, c.prompt_dim);
      align_.v_bias = params_.add_bias("align.v.bias", c.prompt_dim);
      align_.o_weight = params_.add_weight("align.out.weight", c.ts_dim, c.ts_dim);
      align_.o_bias = params_.add_bias("align.out.bias", c.ts_dim);
    }
    for (std::size_t i = 0; i < c.layers_dec; ++i) {
      decoder_blocks_.push_back(
          DecoderBlock::create(params_, "decoder." + std::to_string(i), c.ts_dim, c.heads, c.causal_decoder));
    }
    proj_w_ = params_.add_weight("projection.weight", c.horizon, c.ts_dim);
    proj_b_ = params_.add_bias("projection.bias", c.horizon);
  }

  ModelConfig config_;
  ParamRegistry params_;
  Tensor embed_w_, embed_b_;
  std::vector<PreLNBlock> ts_blocks_;
  Tensor prompt_proj_w_, prompt_proj_b_;
  std::vector<PreLNBlock> prompt_blocks_;
  AlignWeights align_;
  std::vector<DecoderBlock> decoder_blocks_;
  Tensor proj_w_, proj_b_;
};

struct LossTerms {
  Tensor total;
  Tensor prediction;
  Tensor regularization;
};

/// L = MSE(prediction, target) + λ·Σ‖W‖² over weight matrices in `params`.
inline LossTerms compute_loss(const Tensor& prediction, const Tensor& target, const ParamRegistry& params,
                              float lambda) {
  if (prediction.shape() != target.shape()) {
    throw DimensionError("loss: prediction " + shape_str(prediction.shape()) + " vs target " +
                         shape_str(target.shape()));
  }
  LossTerms out;
  out.prediction = mse(prediction, target);
  out.regularization = l2_penalty(params);
  out.total = lambda == 0.0f ? out.prediction : add(out.prediction, scale(out.regularization, lambda));
  return out;
}

}  // namespace timecma
