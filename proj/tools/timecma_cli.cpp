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

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "timecma/harness.hpp"
#include "timecma/synthetic.hpp"

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::vector<std::string> overrides;  // key=value
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("-c,--config", c.config, "experiment config (key = value lines)")->required();
  cmd->add_option("--seed", c.seed, "override seed");
  cmd->add_option("-o,--out", c.out, "override out_dir");
  cmd->add_option("-s,--set", c.overrides, "override a config key, e.g. --set train.epochs=5");
}

timecma::ExperimentConfig resolve(const Common& c) {
  auto cfg = timecma::load_config(c.config);
  for (const auto& kv : c.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw timecma::ConfigError("--set expects key=value, got '" + kv + "'");
    timecma::set_config_value(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (c.seed) cfg.seed = *c.seed;
  if (!c.out.empty()) cfg.out_dir = c.out;
  return cfg;
}

void print_report(const char* label, const timecma::ForecastReport& r) {
  std::printf("%s: windows=%zu mse=%.6f mae=%.6f persistence_mse=%.6f persistence_mae=%.6f params=%zu\n", label,
              r.windows, r.mse, r.mae, r.persistence_mse, r.persistence_mae, r.param_count);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"timecma: forecasting with cross-modality alignment over cached prompt embeddings"};
  app.require_subcommand(1);

  Common gen_c, emb_c, train_c, eval_c, zs_c, bench_c;
  auto* gen = app.add_subcommand("gen-prompts", "render prompts for every window and split");
  add_common(gen, gen_c);
  auto* emb = app.add_subcommand("embed-stub", "build deterministic stub embedding stores from prompts");
  add_common(emb, emb_c);
  auto* train = app.add_subcommand("train", "train a model and write checkpoint + loss log");
  add_common(train, train_c);

  std::string ckpt;
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on the test split");
  add_common(eval, eval_c);
  eval->add_option("--checkpoint", ckpt, "checkpoint path (default: <out_dir>/checkpoint.tcmk)");

  std::string source_ckpt;
  auto* zs = app.add_subcommand("zeroshot", "evaluate a source checkpoint on a target dataset");
  add_common(zs, zs_c);
  zs->add_option("--source", source_ckpt, "source checkpoint")->required();

  auto* bench = app.add_subcommand("bench", "batch-1 inference timing, parameter count, peak memory");
  add_common(bench, bench_c);
  bench->add_option("--checkpoint", ckpt, "checkpoint path (default: <out_dir>/checkpoint.tcmk)");

  std::string store;
  std::optional<std::size_t> win, var;
  auto* inspect = app.add_subcommand("inspect-store", "validate and summarize an embedding store");
  inspect->add_option("store", store, "store file")->required();
  inspect->add_option("--window", win, "print one vector: window index");
  inspect->add_option("--variable", var, "print one vector: variable index");

  std::string synth_kind, synth_out;
  std::optional<std::uint64_t> synth_seed;
  auto* synth = app.add_subcommand("synth", "write a synthetic benchmark-shaped CSV");
  synth->add_option("kind", synth_kind, "ili | etth1 | etth2 | fred-md")
      ->required()
      ->check(CLI::IsMember({"ili", "etth1", "etth2", "fred-md"}));
  synth->add_option("-o,--out", synth_out, "output CSV")->required();
  synth->add_option("--seed", synth_seed, "generator seed (default: per-dataset)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) {
      const auto cfg = resolve(gen_c);
      const auto r = timecma::cmd_gen_prompts(cfg);
      std::printf("prompts: train=%zu val=%zu test=%zu manifest=%s\n", r.records[0], r.records[1], r.records[2],
                  r.manifest.c_str());
    } else if (*emb) {
      const auto r = timecma::cmd_embed_stub(resolve(emb_c));
      for (const auto& p : r.stores) std::printf("store: %s\n", p.c_str());
    } else if (*train) {
      const auto cfg = resolve(train_c);
      const auto r = timecma::cmd_train(cfg);
      for (const auto& row : r.result.log) {
        std::printf("epoch %zu train_loss=%.6f val_loss=%.6f\n", row.epoch, row.train_loss, row.val_loss);
      }
      std::printf("best_epoch=%zu best_val_loss=%.6f checkpoint=%s\n", r.result.best_epoch, r.result.best_val_loss,
                  r.checkpoint.c_str());
    } else if (*eval) {
      const auto cfg = resolve(eval_c);
      print_report("eval", timecma::cmd_eval(cfg, ckpt.empty() ? timecma::checkpoint_path(cfg).string() : ckpt));
    } else if (*zs) {
      print_report("zeroshot", timecma::cmd_zeroshot(source_ckpt, resolve(zs_c)));
    } else if (*bench) {
      const auto cfg = resolve(bench_c);
      const auto row = timecma::cmd_bench(cfg, ckpt.empty() ? timecma::checkpoint_path(cfg).string() : ckpt);
      std::printf("%s\n%s\n", timecma::bench_csv_header().c_str(), timecma::bench_csv_row(row).c_str());
    } else if (*inspect) {
      std::optional<timecma::EmbedKey> key;
      if (win || var) key = timecma::EmbedKey{win.value_or(0), var.value_or(0)};
      std::fputs(timecma::cmd_inspect_store(store, key).c_str(), stdout);
    } else if (*synth) {
      timecma::SeriesDataset ds;
      if (synth_kind == "ili") ds = synth_seed ? timecma::synthetic::ili(*synth_seed) : timecma::synthetic::ili();
      else if (synth_kind == "etth1") ds = timecma::synthetic::ett_hourly(1, 14400, synth_seed.value_or(11));
      else if (synth_kind == "etth2") ds = timecma::synthetic::ett_hourly(2, 14400, synth_seed.value_or(11));
      else ds = timecma::synthetic::fred_md(20, synth_seed.value_or(13));
      timecma::write_csv(ds, synth_out);
      std::printf("wrote %s (%zu rows × %zu variables)\n", synth_out.c_str(), ds.length(), ds.num_variables());
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
