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

#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "timecma/tensor.hpp"

namespace timecma {

/// Seeded generator whose outputs are defined by the mt19937_64 algorithm
/// alone, so draws are identical across standard libraries and platforms.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1) with 24 bits of resolution.
  float uniform01() { return static_cast<float>(engine_() >> 40) * 0x1.0p-24f; }

  float uniform(float lo, float hi) { return lo + (hi - lo) * uniform01(); }

  double uniform01_d() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Standard normal via Box-Muller.
  double normal() {
    double u1 = uniform01_d();
    while (u1 <= 0.0) u1 = uniform01_d();
    const double u2 = uniform01_d();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  /// Uniform integer in [0, n).
  std::size_t below(std::size_t n) { return static_cast<std::size_t>(engine_() % n); }

  /// Fisher-Yates shuffle with the draws above (std::shuffle is
  /// implementation-defined).
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[below(i)]);
  }

 private:
  std::mt19937_64 engine_;
};

enum class ParamKind { Weight, Bias, Norm };

struct ParamEntry {
  std::string name;
  Tensor value;
  ParamKind kind;
};

/// Ordered name → parameter map. Initialization draws from one generator
/// in registration order, so the same seed and registration sequence yields
/// bit-identical values.
class ParamRegistry {
 public:
  explicit ParamRegistry(std::uint64_t seed = 0) : seed_(seed), rng_(seed) {}

  ParamRegistry(const ParamRegistry&) = delete;
  ParamRegistry& operator=(const ParamRegistry&) = delete;
  ParamRegistry(ParamRegistry&&) = default;
  ParamRegistry& operator=(ParamRegistry&&) = default;

  Tensor add(const std::string& name, Tensor value, ParamKind kind = ParamKind::Weight) {
    if (index_.count(name)) throw UsageError("duplicate parameter name: " + name);
    value.set_requires_grad(true);
    index_.emplace(name, entries_.size());
    entries_.push_back({name, value, kind});
    return value;
  }

  /// [out×in] weight drawn from uniform(−1/√in, 1/√in).
  Tensor add_weight(const std::string& name, std::size_t out, std::size_t in) {
    const float bound = 1.0f / std::sqrt(static_cast<float>(in));
    std::vector<float> v(out * in);
    for (auto& x : v) x = rng_.uniform(-bound, bound);
    return add(name, Tensor({out, in}, std::move(v)), ParamKind::Weight);
  }

  Tensor add_bias(const std::string& name, std::size_t n) {
    return add(name, Tensor::zeros({n}), ParamKind::Bias);
  }

  Tensor add_norm_scale(const std::string& name, std::size_t n) {
    return add(name, Tensor::full({n}, 1.0f), ParamKind::Norm);
  }

  Tensor add_norm_shift(const std::string& name, std::size_t n) {
    return add(name, Tensor::zeros({n}), ParamKind::Norm);
  }

  bool contains(const std::string& name) const { return index_.count(name) != 0; }

  const Tensor& get(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw UsageError("unknown parameter: " + name);
    return entries_[it->second].value;
  }

  const std::vector<ParamEntry>& entries() const { return entries_; }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }
  std::size_t size() const { return entries_.size(); }
  std::uint64_t seed() const { return seed_; }

  std::size_t count_scalars() const {
    std::size_t n = 0;
    for (const auto& e : entries_) n += e.value.numel();
    return n;
  }

  void zero_grad() {
    for (auto& e : entries_) e.value.zero_grad();
  }

  /// Deep copy of every parameter's values, in registration order.
  std::vector<std::vector<float>> snapshot() const {
    std::vector<std::vector<float>> out;
    out.reserve(entries_.size());
    for (const auto& e : entries_) out.push_back(e.value.to_vector());
    return out;
  }

  void restore(const std::vector<std::vector<float>>& values) {
    if (values.size() != entries_.size()) throw UsageError("restore: parameter count differs");
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      auto dst = entries_[i].value.mutable_data();
      if (values[i].size() != dst.size()) {
        throw DimensionError("restore: size mismatch for " + entries_[i].name);
      }
      std::copy(values[i].begin(), values[i].end(), dst.begin());
    }
  }

 private:
  std::uint64_t seed_;
  Rng rng_;
  std::vector<ParamEntry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace timecma
