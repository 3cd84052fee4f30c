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

#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "timecma/adamw.hpp"
#include "timecma/data.hpp"
#include "timecma/embed_store.hpp"
#include "timecma/model.hpp"

namespace timecma {

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Windows of one split paired with their prompt embeddings, with the
/// normalized tensors the model consumes precomputed.
struct PreparedSplit {
  std::vector<TimeSeriesWindow> windows;  // raw (original scale)
  std::vector<Tensor> inputs;             // T×N normalized lookback
  std::vector<Tensor> targets;            // M×N normalized target
  std::vector<Tensor> prompts;            // N×E

  std::size_t size() const { return windows.size(); }
  bool empty() const { return windows.empty(); }
};

inline PreparedSplit prepare_split(std::vector<TimeSeriesWindow> windows, const EmbeddingBlock& embeddings) {
  if (embeddings.num_windows != windows.size()) {
    throw TrainingError("embedding store has " + std::to_string(embeddings.num_windows) +
                        " windows, split has " + std::to_string(windows.size()));
  }
  PreparedSplit s;
  for (std::size_t i = 0; i < windows.size(); ++i) {
    const auto& w = windows[i];
    if (w.num_variables != embeddings.num_variables) {
      throw TrainingError("embedding store has " + std::to_string(embeddings.num_variables) +
                          " variables, data has " + std::to_string(w.num_variables));
    }
    const auto norm = revin_normalize(w);
    s.inputs.push_back(Tensor::matrix(w.lookback_len, w.num_variables, norm.lookback));
    s.targets.push_back(Tensor::matrix(w.horizon, w.num_variables, norm.target));
    const auto slab = embeddings.window(i);
    s.prompts.push_back(Tensor::matrix(w.num_variables, embeddings.embed_dim,
                                       std::vector<float>(slab.begin(), slab.end())));
  }
  s.windows = std::move(windows);
  return s;
}

struct TrainOptions {
  std::size_t epochs = 50;
  std::size_t patience = 10;
  std::size_t batch_size = 16;
  AdamWOptions optim;
  std::uint64_t shuffle_seed = 0;
  bool shuffle = true;
};

struct EpochLog {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;
};

struct TrainResult {
  std::vector<EpochLog> log;
  std::size_t best_epoch = 0;
  double best_val_loss = std::numeric_limits<double>::infinity();
  std::size_t steps = 0;
};

/// One optimizer step on the windows `batch` of `data`. The gradient is that
/// of mean(L_pre over the batch) + λ·L_reg. Returns the batch-mean L_pre.
inline double train_step(TimeCMA& model, AdamW& optimizer, const PreparedSplit& data,
                         std::span<const std::size_t> batch) {
  if (batch.empty()) throw UsageError("train_step: empty batch");
  auto& params = model.params();
  params.zero_grad();
  const float inv = 1.0f / static_cast<float>(batch.size());
  double total = 0.0;
  for (auto idx : batch) {
    const Tensor pred = model.forward(data.inputs[idx], data.prompts[idx]);
    const Tensor loss = mse(pred, data.targets[idx]);
    const float value = loss.item();
    if (!std::isfinite(value)) {
      throw TrainingError("non-finite loss at window " + std::to_string(data.windows[idx].window_id) +
                          " (start row " + std::to_string(data.windows[idx].start_row) + ")");
    }
    total += value;
    backward(scale(loss, inv));
  }
  const float lambda = model.config().lambda;
  if (lambda > 0.0f) backward(scale(model.regularization(), lambda));
  optimizer.step();
  return total / static_cast<double>(batch.size());
}

/// Mean normalized-space MSE over a split, without recording a graph.
inline double mean_prediction_loss(const TimeCMA& model, const PreparedSplit& data) {
  if (data.empty()) return std::numeric_limits<double>::quiet_NaN();
  NoGradGuard no_grad;
  double total = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    total += mse(model.forward(data.inputs[i], data.prompts[i]), data.targets[i]).item();
  }
  return total / static_cast<double>(data.size());
}

/// Epoch loop with AdamW, keeping the parameters of the epoch with the lowest
/// validation loss (training loss when no validation windows exist) and
/// stopping after `patience` epochs without improvement. The model holds the
/// best parameters on return.
inline TrainResult train_model(TimeCMA& model, const PreparedSplit& train, const PreparedSplit& val,
                               const TrainOptions& opts,
                               const std::function<void(const EpochLog&)>& on_epoch = {}) {
  if (train.empty()) throw TrainingError("no training windows");
  if (opts.batch_size == 0) throw TrainingError("batch size must be positive");
  AdamW optimizer(model.params(), opts.optim);
  Rng rng(opts.shuffle_seed);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  TrainResult result;
  auto best = model.params().snapshot();
  std::size_t since_best = 0;
  for (std::size_t epoch = 1; epoch <= opts.epochs; ++epoch) {
    if (opts.shuffle) rng.shuffle(order);
    double sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += opts.batch_size) {
      const std::size_t len = std::min(opts.batch_size, order.size() - start);
      sum += train_step(model, optimizer, train, std::span(order).subspan(start, len));
      ++batches;
      ++result.steps;
    }
    EpochLog row{epoch, sum / static_cast<double>(batches), 0.0};
    row.val_loss = val.empty() ? row.train_loss : mean_prediction_loss(model, val);
    if (!std::isfinite(row.val_loss)) throw TrainingError("non-finite validation loss at epoch " + std::to_string(epoch));
    result.log.push_back(row);
    if (on_epoch) on_epoch(row);
    if (row.val_loss < result.best_val_loss) {
      result.best_val_loss = row.val_loss;
      result.best_epoch = epoch;
      best = model.params().snapshot();
      since_best = 0;
    } else if (++since_best >= opts.patience) {
      break;
    }
  }
  model.params().restore(best);
  return result;
}

// ---------------------------------------------------------------------------
// Evaluation

struct ForecastReport {
  std::size_t windows = 0;
  double mse = 0.0;
  double mae = 0.0;
  double persistence_mse = 0.0;
  double persistence_mae = 0.0;
  double seconds_per_window = 0.0;
  std::size_t param_count = 0;
  double peak_memory_mib = 0.0;
  std::vector<std::vector<float>> predictions;  // per window, M×N denormalized; optional
};

/// Peak resident set size of this process in MiB (0 when unavailable).
inline double peak_rss_mib() {
  std::ifstream status("/proc/self/status");
  std::string line;
  while (std::getline(status, line)) {
    if (line.rfind("VmHWM:", 0) == 0) {
      std::istringstream is(line.substr(6));
      double kb = 0.0;
      is >> kb;
      return kb / 1024.0;
    }
  }
  return 0.0;
}

/// Predictor: window index → M×N forecast in the windows' original scale.
using Predictor = std::function<std::vector<float>(std::size_t)>;

/// MSE/MAE over every (window, step, variable) of the split, in original
/// units, plus the repeat-last-value baseline. Timing covers predictor calls only.
inline ForecastReport evaluate_predictor(const std::vector<TimeSeriesWindow>& windows, const Predictor& predict,
                                         bool keep_predictions = false) {
  ForecastReport r;
  r.windows = windows.size();
  if (windows.empty()) return r;
  double se = 0.0, ae = 0.0, pse = 0.0, pae = 0.0, seconds = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < windows.size(); ++i) {
    const auto& w = windows[i];
    const auto t0 = std::chrono::steady_clock::now();
    auto pred = predict(i);
    seconds += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (pred.size() != w.target.size()) throw TrainingError("predictor returned wrong shape");
    const std::size_t n = w.num_variables;
    for (std::size_t t = 0; t < w.horizon; ++t) {
      for (std::size_t v = 0; v < n; ++v) {
        const double truth = w.target_at(t, v);
        const double d = pred[t * n + v] - truth;
        se += d * d;
        ae += std::fabs(d);
        const double p = static_cast<double>(w.lookback_at(w.lookback_len - 1, v)) - truth;
        pse += p * p;
        pae += std::fabs(p);
        ++count;
      }
    }
    if (keep_predictions) r.predictions.push_back(std::move(pred));
  }
  const double c = static_cast<double>(count);
  r.mse = se / c;
  r.mae = ae / c;
  r.persistence_mse = pse / c;
  r.persistence_mae = pae / c;
  r.seconds_per_window = seconds / static_cast<double>(windows.size());
  r.peak_memory_mib = peak_rss_mib();
  return r;
}

/// Batch-size-1 evaluation of a model over a prepared split.
inline ForecastReport evaluate(const TimeCMA& model, const PreparedSplit& data, bool keep_predictions = false) {
  auto report = evaluate_predictor(
      data.windows,
      [&](std::size_t i) {
        NoGradGuard no_grad;
        const auto pred = model.forward(data.inputs[i], data.prompts[i]).to_vector();
        return revin_denormalize(pred, data.windows[i].horizon, data.windows[i].stats);
      },
      keep_predictions);
  report.param_count = model.count_params();
  return report;
}

}  // namespace timecma
