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

#include <gtest/gtest.h>

#include "test_util.hpp"
#include "timecma/blocks.hpp"

namespace timecma {
namespace {

using testing::check_gradients;
using testing::probe;
using testing::random_tensor;
using testing::zero_fill;

constexpr double kGradTol = 1e-3;

std::vector<Tensor> all_params(const ParamRegistry& reg) {
  std::vector<Tensor> out;
  for (const auto& e : reg) out.push_back(e.value);
  return out;
}

void set_identity(Tensor w) {
  zero_fill(w);
  const std::size_t d = w.dim(0);
  for (std::size_t i = 0; i < d; ++i) w.mutable_data()[i * d + i] = 1.0f;
}

Tensor permute_rows(const Tensor& x, const std::vector<std::size_t>& perm) {
  std::vector<float> out(x.numel());
  const std::size_t c = x.cols();
  for (std::size_t r = 0; r < perm.size(); ++r)
    for (std::size_t j = 0; j < c; ++j) out[r * c + j] = x.at(perm[r], j);
  return Tensor::matrix(x.rows(), c, std::move(out));
}

TEST(AttentionConfig, RejectsIndivisibleHeads) {
  EXPECT_THROW((AttentionConfig{10, 4, false}.validate()), DimensionError);
  EXPECT_NO_THROW((AttentionConfig{12, 4, false}.validate()));
}

TEST(Mhsa, SingleTokenIdentityProjectionsReturnsInput) {
  ParamRegistry reg(1);
  auto w = AttentionWeights::create(reg, "a", 4);
  for (auto t : {w.q_weight, w.k_weight, w.v_weight, w.o_weight}) set_identity(t);
  const Tensor x = Tensor::matrix({{0.3f, -1.0f, 2.0f, 0.5f}});
  EXPECT_EQ(mhsa(x, {4, 1, false}, w).to_vector(), x.to_vector());
}

TEST(Mhsa, CausalOutputsBeforePerturbedTokenAreBitIdentical) {
  Rng rng(2);
  ParamRegistry reg(2);
  const AttentionConfig cfg{8, 2, true};
  auto w = AttentionWeights::create(reg, "a", 8);
  const Tensor x = random_tensor(rng, {6, 8});
  const auto base = mhsa(x, cfg, w).to_vector();
  for (std::size_t j = 0; j < 6; ++j) {
    Tensor p = x.clone();
    for (std::size_t c = 0; c < 8; ++c) p.mutable_data()[j * 8 + c] += 0.7f;
    const auto out = mhsa(p, cfg, w).to_vector();
    for (std::size_t i = 0; i < j * 8; ++i) ASSERT_EQ(out[i], base[i]) << "token " << j;
    bool changed = false;
    for (std::size_t i = j * 8; i < (j + 1) * 8; ++i) changed |= out[i] != base[i];
    EXPECT_TRUE(changed);
  }
}

TEST(Mhsa, EqualKeysGiveUniformAttention) {
  Rng rng(3);
  ParamRegistry reg(3);
  auto w = AttentionWeights::create(reg, "a", 4);
  zero_fill(w.k_weight);  // every key equals the bias
  std::vector<Tensor> attn;
  mhsa(random_tensor(rng, {2, 4}), {4, 2, false}, w, &attn);
  ASSERT_EQ(attn.size(), 2u);
  for (const auto& a : attn)
    for (float v : a.data()) EXPECT_FLOAT_EQ(v, 0.5f);
}

TEST(Mhsa, NonCausalPermutationEquivariance) {
  Rng rng(4);
  ParamRegistry reg(4);
  const AttentionConfig cfg{16, 4, false};
  auto w = AttentionWeights::create(reg, "a", 16);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t n = 2 + rng.below(7);
    const Tensor x = random_tensor(rng, {n, 16});
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    rng.shuffle(perm);
    const Tensor a = permute_rows(mhsa(x, cfg, w), perm);
    const Tensor b = mhsa(permute_rows(x, perm), cfg, w);
    EXPECT_LT(testing::max_abs_diff(a.data(), b.data()), 1e-5f);
  }
}

TEST(Mhsa, AttentionRowsSumToOne) {
  Rng rng(5);
  ParamRegistry reg(5);
  auto w = AttentionWeights::create(reg, "a", 8);
  for (bool causal : {false, true}) {
    std::vector<Tensor> attn;
    mhsa(random_tensor(rng, {5, 8}, -3, 3), {8, 4, causal}, w, &attn);
    for (const auto& a : attn)
      for (std::size_t r = 0; r < 5; ++r) {
        double total = 0.0;
        for (std::size_t c = 0; c < 5; ++c) total += a.at(r, c);
        EXPECT_NEAR(total, 1.0, 1e-6);
      }
  }
}

TEST(Mhsa, InputDimMismatchThrows) {
  ParamRegistry reg(6);
  auto w = AttentionWeights::create(reg, "a", 8);
  EXPECT_THROW(mhsa(Tensor::zeros({3, 4}), {8, 2, false}, w), DimensionError);
}

TEST(Mhca, SameTokensReducesToMhsa) {
  Rng rng(7);
  ParamRegistry reg(7);
  auto w = AttentionWeights::create(reg, "a", 8);
  const Tensor x = random_tensor(rng, {4, 8});
  EXPECT_EQ(mhca(x, x, {8, 2, false}, w).to_vector(), mhsa(x, {8, 2, false}, w).to_vector());
}

TEST(Mhca, SingleKeyRepeatsProjectedValue) {
  Rng rng(8);
  ParamRegistry reg(8);
  auto w = AttentionWeights::create(reg, "a", 8);
  const Tensor kv = random_tensor(rng, {1, 8});
  const Tensor out = mhca(random_tensor(rng, {3, 8}), kv, {8, 4, false}, w);
  const Tensor expect = linear(linear(kv, w.v_weight, w.v_bias), w.o_weight, w.o_bias);
  for (std::size_t r = 0; r < 3; ++r)
    for (std::size_t c = 0; c < 8; ++c) EXPECT_NEAR(out.at(r, c), expect.at(0, c), 1e-6f);
}

TEST(Mhca, GradientsOnRandomShapes) {
  Rng rng(9);
  for (int i = 0; i < 5; ++i) {
    const std::size_t heads = 1 + rng.below(3), dim = heads * (1 + rng.below(4));
    const std::size_t a = 1 + rng.below(4), b = 1 + rng.below(6);
    ParamRegistry reg(10 + i);
    auto w = AttentionWeights::create(reg, "a", dim);
    Tensor q = random_tensor(rng, {a, dim}, -1, 1, true);
    Tensor kv = random_tensor(rng, {b, dim}, -1, 1, true);
    auto in = all_params(reg);
    in.push_back(q);
    in.push_back(kv);
    const auto gc = check_gradients([&] { return probe(mhca(q, kv, {dim, heads, false}, w)); }, in);
    EXPECT_LT(gc.rel_error, kGradTol) << "a=" << a << " b=" << b << " dim=" << dim;
  }
  // Fixed case a=3, b=5.
  ParamRegistry reg(20);
  auto w = AttentionWeights::create(reg, "a", 8);
  Tensor q = random_tensor(rng, {3, 8}, -1, 1, true), kv = random_tensor(rng, {5, 8}, -1, 1, true);
  const auto gc = check_gradients([&] { return probe(mhca(q, kv, {8, 2, false}, w)); }, all_params(reg));
  EXPECT_LT(gc.rel_error, kGradTol);
}

TEST(Mhsa, CausalGradientsOnRandomShapes) {
  Rng rng(11);
  for (int i = 0; i < 5; ++i) {
    const std::size_t dim = 4 * (1 + rng.below(2)), n = 1 + rng.below(6);
    ParamRegistry reg(30 + i);
    auto w = AttentionWeights::create(reg, "a", dim);
    Tensor x = random_tensor(rng, {n, dim}, -1, 1, true);
    auto in = all_params(reg);
    in.push_back(x);
    const auto gc = check_gradients([&] { return probe(mhsa(x, {dim, 2, true}, w)); }, in);
    EXPECT_LT(gc.rel_error, kGradTol);
  }
}

// ---------------------------------------------------------------------------
// Encoder / decoder layers

TEST(EncoderLayer, ZeroOutputProjectionsGiveExactIdentity) {
  Rng rng(12);
  ParamRegistry reg(12);
  auto block = PreLNBlock::create(reg, "enc", 16, 4, 64);
  for (auto t : {block.attn.o_weight, block.attn.o_bias, block.ffn.w2, block.ffn.b2}) zero_fill(t);
  const Tensor x = random_tensor(rng, {5, 16}, -4, 4);
  EXPECT_EQ(pre_ln_encoder_layer(x, block).to_vector(), x.to_vector());
}

TEST(EncoderLayer, StackPreservesShapeForAnyDepth) {
  Rng rng(13);
  ParamRegistry reg(13);
  std::vector<PreLNBlock> blocks;
  for (int i = 0; i < 4; ++i) blocks.push_back(PreLNBlock::create(reg, "enc" + std::to_string(i), 8, 2, 16));
  const Tensor x = random_tensor(rng, {3, 8});
  for (std::size_t k = 0; k <= blocks.size(); ++k) {
    Tensor y = x;
    for (std::size_t i = 0; i < k; ++i) y = pre_ln_encoder_layer(y, blocks[i]);
    EXPECT_EQ(y.shape(), x.shape());
  }
}

TEST(EncoderLayer, AblatingFeedForwardChangesOutput) {
  Rng rng(14);
  ParamRegistry reg(14);
  auto block = PreLNBlock::create(reg, "enc", 8, 2, 32);
  const Tensor x = random_tensor(rng, {4, 8});
  const auto with = pre_ln_encoder_layer(x, block).to_vector();
  block.use_ffn = false;
  EXPECT_NE(pre_ln_encoder_layer(x, block).to_vector(), with);
}

TEST(EncoderLayer, GradientsOnRandomShapes) {
  Rng rng(15);
  for (int i = 0; i < 5; ++i) {
    const std::size_t dim = 4 * (1 + rng.below(3)), n = 1 + rng.below(6);
    ParamRegistry reg(40 + i);
    auto block = PreLNBlock::create(reg, "enc", dim, 2, 2 * dim);
    Tensor x = random_tensor(rng, {n, dim}, -1, 1, true);
    auto in = all_params(reg);
    in.push_back(x);
    const auto gc = check_gradients([&] { return probe(pre_ln_encoder_layer(x, block)); }, in);
    EXPECT_LT(gc.rel_error, kGradTol) << "n=" << n << " dim=" << dim;
  }
}

TEST(DecoderLayer, ZeroOutputProjectionsGiveExactIdentity) {
  Rng rng(16);
  ParamRegistry reg(16);
  auto block = DecoderBlock::create(reg, "dec", 16, 4);
  for (auto t : {block.self_attn.o_weight, block.self_attn.o_bias, block.cross_attn.o_weight,
                 block.cross_attn.o_bias})
    zero_fill(t);
  const Tensor x = random_tensor(rng, {5, 16}, -4, 4);
  EXPECT_EQ(pre_ln_decoder_layer(x, random_tensor(rng, {5, 16}), block).to_vector(), x.to_vector());
}

TEST(DecoderLayer, PreservesShapeWithDifferentContextLength) {
  Rng rng(17);
  ParamRegistry reg(17);
  auto block = DecoderBlock::create(reg, "dec", 8, 2);
  const Tensor y = pre_ln_decoder_layer(random_tensor(rng, {3, 8}), random_tensor(rng, {7, 8}), block);
  EXPECT_EQ(y.shape(), (Shape{3, 8}));
}

TEST(DecoderLayer, GradientsOnRandomShapes) {
  Rng rng(18);
  for (int i = 0; i < 5; ++i) {
    const std::size_t dim = 4 * (1 + rng.below(3)), n = 1 + rng.below(6);
    ParamRegistry reg(50 + i);
    auto block = DecoderBlock::create(reg, "dec", dim, 2, i % 2 == 0);
    Tensor x = random_tensor(rng, {n, dim}, -1, 1, true);
    Tensor ctx = random_tensor(rng, {n, dim}, -1, 1, true);
    auto in = all_params(reg);
    in.push_back(x);
    in.push_back(ctx);
    const auto gc = check_gradients([&] { return probe(pre_ln_decoder_layer(x, ctx, block)); }, in);
    EXPECT_LT(gc.rel_error, kGradTol) << "n=" << n << " dim=" << dim;
  }
}

}  // namespace
}  // namespace timecma
