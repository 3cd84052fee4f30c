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

// Pre-LN transformer pieces over token-major matrices [tokens × dim].
// No positional encoding is applied anywhere: tokens are variables.

#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "timecma/params.hpp"
#include "timecma/tensor.hpp"

namespace timecma {

struct AttentionConfig {
  std::size_t model_dim = 0;
  std::size_t num_heads = 8;
  bool causal = false;

  std::size_t head_dim() const { return model_dim / num_heads; }

  void validate() const {
    if (model_dim == 0 || num_heads == 0 || model_dim % num_heads != 0) {
      throw DimensionError("attention: model_dim " + std::to_string(model_dim) +
                           " not divisible by num_heads " + std::to_string(num_heads));
    }
  }
};

struct AttentionWeights {
  Tensor q_weight, q_bias;
  Tensor k_weight, k_bias;
  Tensor v_weight, v_bias;
  Tensor o_weight, o_bias;

  static AttentionWeights create(ParamRegistry& reg, const std::string& prefix, std::size_t dim) {
    AttentionWeights w;
    w.q_weight = reg.add_weight(prefix + ".q.weight", dim, dim);
    w.q_bias = reg.add_bias(prefix + ".q.bias", dim);
    w.k_weight = reg.add_weight(prefix + ".k.weight", dim, dim);
    w.k_bias = reg.add_bias(prefix + ".k.bias", dim);
    w.v_weight = reg.add_weight(prefix + ".v.weight", dim, dim);
    w.v_bias = reg.add_bias(prefix + ".v.bias", dim);
    w.o_weight = reg.add_weight(prefix + ".o.weight", dim, dim);
    w.o_bias = reg.add_bias(prefix + ".o.bias", dim);
    return w;
  }
};

struct LayerNormWeights {
  Tensor gamma, beta;

  static LayerNormWeights create(ParamRegistry& reg, const std::string& prefix, std::size_t dim) {
    return {reg.add_norm_scale(prefix + ".gamma", dim), reg.add_norm_shift(prefix + ".beta", dim)};
  }

  Tensor operator()(const Tensor& x) const { return layer_norm(x, gamma, beta); }
};

struct FeedForwardWeights {
  Tensor w1, b1, w2, b2;

  static FeedForwardWeights create(ParamRegistry& reg, const std::string& prefix, std::size_t dim,
                                   std::size_t inner) {
    FeedForwardWeights f;
    f.w1 = reg.add_weight(prefix + ".fc1.weight", inner, dim);
    f.b1 = reg.add_bias(prefix + ".fc1.bias", inner);
    f.w2 = reg.add_weight(prefix + ".fc2.weight", dim, inner);
    f.b2 = reg.add_bias(prefix + ".fc2.bias", dim);
    return f;
  }
};

/// Encoder layer: LN → MHSA → residual, LN → FFN → residual.
struct PreLNBlock {
  AttentionConfig attn_cfg;
  LayerNormWeights ln1, ln2;
  AttentionWeights attn;
  FeedForwardWeights ffn;
  bool use_ffn = true;

  static PreLNBlock create(ParamRegistry& reg, const std::string& prefix, std::size_t dim,
                           std::size_t num_heads, std::size_t ffn_dim, bool causal = false) {
    PreLNBlock b;
    b.attn_cfg = {dim, num_heads, causal};
    b.attn_cfg.validate();
    b.ln1 = LayerNormWeights::create(reg, prefix + ".ln1", dim);
    b.attn = AttentionWeights::create(reg, prefix + ".attn", dim);
    b.ln2 = LayerNormWeights::create(reg, prefix + ".ln2", dim);
    b.ffn = FeedForwardWeights::create(reg, prefix + ".ffn", dim, ffn_dim);
    return b;
  }
};

/// Decoder layer: LN → masked MHSA → residual, LN → MHCA(context) → residual.
struct DecoderBlock {
  AttentionConfig self_cfg;
  AttentionConfig cross_cfg;
  LayerNormWeights ln1, ln2;
  AttentionWeights self_attn, cross_attn;

  static DecoderBlock create(ParamRegistry& reg, const std::string& prefix, std::size_t dim,
                             std::size_t num_heads, bool causal = true) {
    DecoderBlock b;
    b.self_cfg = {dim, num_heads, causal};
    b.cross_cfg = {dim, num_heads, false};
    b.self_cfg.validate();
    b.ln1 = LayerNormWeights::create(reg, prefix + ".ln1", dim);
    b.self_attn = AttentionWeights::create(reg, prefix + ".self_attn", dim);
    b.ln2 = LayerNormWeights::create(reg, prefix + ".ln2", dim);
    b.cross_attn = AttentionWeights::create(reg, prefix + ".cross_attn", dim);
    return b;
  }
};

/// Multi-head attention with queries from `q_tokens` [a×d] and keys/values
/// from `kv_tokens` [b×d]. Per head: softmax(Q·Kᵀ/√head_dim)·V; heads are
/// concatenated and output-projected. If `attention` is non-null it receives
/// one [a×b] weight matrix per head.
inline Tensor mhca(const Tensor& q_tokens, const Tensor& kv_tokens, const AttentionConfig& cfg,
                   const AttentionWeights& w, std::vector<Tensor>* attention = nullptr) {
  cfg.validate();
  if (q_tokens.rank() != 2 || kv_tokens.rank() != 2 || q_tokens.dim(1) != cfg.model_dim ||
      kv_tokens.dim(1) != cfg.model_dim) {
    throw DimensionError("attention: inputs " + shape_str(q_tokens.shape()) + ", " +
                         shape_str(kv_tokens.shape()) + " do not match model_dim " +
                         std::to_string(cfg.model_dim));
  }
  if (cfg.causal && q_tokens.dim(0) != kv_tokens.dim(0)) {
    throw DimensionError("attention: causal mask needs equal query and key counts");
  }
  const Tensor q = linear(q_tokens, w.q_weight, w.q_bias);
  const Tensor k = linear(kv_tokens, w.k_weight, w.k_bias);
  const Tensor v = linear(kv_tokens, w.v_weight, w.v_bias);
  const std::size_t hd = cfg.head_dim();
  const float inv_sqrt = 1.0f / std::sqrt(static_cast<float>(hd));
  std::vector<Tensor> heads;
  heads.reserve(cfg.num_heads);
  if (attention) attention->clear();
  for (std::size_t h = 0; h < cfg.num_heads; ++h) {
    const Tensor qh = cfg.num_heads == 1 ? q : slice_cols(q, h * hd, hd);
    const Tensor kh = cfg.num_heads == 1 ? k : slice_cols(k, h * hd, hd);
    const Tensor vh = cfg.num_heads == 1 ? v : slice_cols(v, h * hd, hd);
    const Tensor scores = scale(matmul(qh, transpose(kh)), inv_sqrt);
    const Tensor probs = cfg.causal ? softmax_causal(scores) : softmax(scores, 1);
    if (attention) attention->push_back(probs);
    heads.push_back(matmul(probs, vh));
  }
  const Tensor joined = cfg.num_heads == 1 ? heads.front() : concat_cols(heads);
  return linear(joined, w.o_weight, w.o_bias);
}

inline Tensor mhsa(const Tensor& x, const AttentionConfig& cfg, const AttentionWeights& w,
                   std::vector<Tensor>* attention = nullptr) {
  return mhca(x, x, cfg, w, attention);
}

/// max(0, x·W₁ᵀ + b₁)·W₂ᵀ + b₂
inline Tensor feed_forward(const Tensor& x, const FeedForwardWeights& f) {
  return linear(relu(linear(x, f.w1, f.b1)), f.w2, f.b2);
}

inline Tensor pre_ln_encoder_layer(const Tensor& x, const PreLNBlock& block,
                                   std::vector<Tensor>* attention = nullptr) {
  const Tensor x1 = add(mhsa(block.ln1(x), block.attn_cfg, block.attn, attention), x);
  if (!block.use_ffn) return x1;
  return add(feed_forward(block.ln2(x1), block.ffn), x1);
}

inline Tensor pre_ln_decoder_layer(const Tensor& x, const Tensor& context, const DecoderBlock& block) {
  const Tensor x1 = add(mhsa(block.ln1(x), block.self_cfg, block.self_attn), x);
  return add(mhca(block.ln2(x1), context, block.cross_cfg, block.cross_attn), x1);
}

}  // namespace timecma
