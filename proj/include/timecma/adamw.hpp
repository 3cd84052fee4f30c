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
#include <cstddef>
#include <vector>

#include "timecma/params.hpp"

namespace timecma {

struct AdamWOptions {
  float lr = 1e-4f;
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float eps = 1e-8f;
  float weight_decay = 0.01f;
};

/// AdamW with decoupled weight decay: w ← w − lr·wd·w, then the
/// bias-corrected Adam update computed from the raw gradient.
class AdamW {
 public:
  AdamW(ParamRegistry& params, AdamWOptions options) : params_(&params), options_(options) {
    for (const auto& e : params) {
      first_.emplace_back(e.value.numel(), 0.0f);
      second_.emplace_back(e.value.numel(), 0.0f);
    }
  }

  const AdamWOptions& options() const { return options_; }
  void set_lr(float lr) { options_.lr = lr; }
  std::size_t step_count() const { return step_; }

  void step() {
    const auto& entries = params_->entries();
    if (entries.size() != first_.size()) {
      throw UsageError("AdamW: registry changed since optimizer construction");
    }
    for (const auto& e : entries) {
      if (!e.value.has_grad()) throw UsageError("AdamW: parameter has no gradient: " + e.name);
    }
    ++step_;
    const double bc1 = 1.0 - std::pow(static_cast<double>(options_.beta1), static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(static_cast<double>(options_.beta2), static_cast<double>(step_));
    const float decay = 1.0f - options_.lr * options_.weight_decay;
    for (std::size_t p = 0; p < entries.size(); ++p) {
      Tensor w = entries[p].value;
      auto wd = w.mutable_data();
      const auto g = w.grad();
      auto& m = first_[p];
      auto& v = second_[p];
      for (std::size_t i = 0; i < wd.size(); ++i) {
        wd[i] *= decay;
        m[i] = options_.beta1 * m[i] + (1.0f - options_.beta1) * g[i];
        v[i] = options_.beta2 * v[i] + (1.0f - options_.beta2) * g[i] * g[i];
        const double m_hat = m[i] / bc1;
        const double v_hat = v[i] / bc2;
        wd[i] -= static_cast<float>(options_.lr * m_hat / (std::sqrt(v_hat) + options_.eps));
      }
    }
  }

 private:
  ParamRegistry* params_;
  AdamWOptions options_;
  std::vector<std::vector<float>> first_;
  std::vector<std::vector<float>> second_;
  std::size_t step_ = 0;
};

}  // namespace timecma
