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

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "timecma/params.hpp"
#include "timecma/tensor.hpp"

namespace timecma::testing {

inline Tensor random_tensor(Rng& rng, Shape shape, float lo = -1.0f, float hi = 1.0f, bool requires_grad = false) {
  Tensor t = Tensor::zeros(std::move(shape), requires_grad);
  for (auto& v : t.mutable_data()) v = rng.uniform(lo, hi);
  return t;
}

struct GradCheck {
  double rel_error = 0.0;      // ‖analytic − numeric‖ / max(‖analytic‖, ‖numeric‖)
  double analytic_norm = 0.0;
  std::size_t checked = 0;
};

/// Compares reverse-mode gradients of `loss_fn` with central differences
/// (step `h`) on the entries of `inputs`. Tensors with more than
/// `max_per_tensor` entries are sampled. `loss_fn` must rebuild the graph on
/// each call.
inline GradCheck check_gradients(const std::function<Tensor()>& loss_fn, const std::vector<Tensor>& inputs,
                                 float h = 1e-3f, std::size_t max_per_tensor = 64, std::uint64_t seed = 99) {
  for (auto t : inputs) t.clear_grad();
  backward(loss_fn());
  Rng rng(seed);
  double diff2 = 0.0, a2 = 0.0, n2 = 0.0;
  GradCheck out;
  for (auto t : inputs) {
    std::vector<float> analytic(t.grad().begin(), t.grad().end());
    analytic.resize(t.numel(), 0.0f);
    std::vector<std::size_t> idx(t.numel());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    if (idx.size() > max_per_tensor) {
      rng.shuffle(idx);
      idx.resize(max_per_tensor);
    }
    auto data = t.mutable_data();
    for (auto i : idx) {
      const float orig = data[i];
      double plus, minus;
      {
        NoGradGuard ng;
        data[i] = orig + h;
        plus = loss_fn().item();
        data[i] = orig - h;
        minus = loss_fn().item();
      }
      data[i] = orig;
      // Use the actually representable step.
      const double step = static_cast<double>(orig + h) - static_cast<double>(orig - h);
      const double numeric = (plus - minus) / step;
      diff2 += (analytic[i] - numeric) * (analytic[i] - numeric);
      a2 += static_cast<double>(analytic[i]) * analytic[i];
      n2 += numeric * numeric;
      ++out.checked;
    }
  }
  out.analytic_norm = std::sqrt(a2);
  out.rel_error = std::sqrt(diff2) / std::max({std::sqrt(a2), std::sqrt(n2), 1e-12});
  return out;
}

/// Scalar probe Σ r⊙y with fixed random weights r, so every output entry
/// contributes a distinct gradient.
inline Tensor probe(const Tensor& y, std::uint64_t seed = 5) {
  Rng rng(seed);
  Tensor r = random_tensor(rng, y.shape());
  return sum(mul(y, r));
}

inline float max_abs_diff(std::span<const float> a, std::span<const float> b) {
  float m = 0.0f;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(a[i] - b[i]));
  return m;
}

inline void zero_fill(Tensor t) {
  for (auto& v : t.mutable_data()) v = 0.0f;
}

/// Fresh directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("timecma_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace timecma::testing
