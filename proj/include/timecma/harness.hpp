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

// Experiment orchestration behind the `timecma` CLI. Every command is a
// plain function of an ExperimentConfig so tests can drive it in-process.

#pragma once

#include <array>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "timecma/checkpoint.hpp"
#include "timecma/data.hpp"
#include "timecma/embed_store.hpp"
#include "timecma/hash.hpp"
#include "timecma/model.hpp"
#include "timecma/prompt.hpp"
#include "timecma/trainer.hpp"

namespace timecma {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Split { Train, Val, Test };
inline constexpr std::array<Split, 3> kAllSplits = {Split::Train, Split::Val, Split::Test};

inline const char* split_name(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
  }
  return "?";
}

struct ExperimentConfig {
  std::string dataset_path;
  std::string dataset_name = "dataset";
  Frequency frequency = Frequency::Hour1;
  SplitRatio split{7, 1, 2};
  bool drop_missing = false;
  bool scale = true;
  std::size_t lookback = 36;
  std::size_t horizon = 24;
  PromptDesign design = PromptDesign::P5;
  int decimals = 2;
  std::string embedder = "stub";  // "stub" or "store:<dir>"
  ModelConfig model;
  TrainOptions train;
  std::uint64_t seed = 2024;
  std::string out_dir = "runs/default";
  bool dump_predictions = false;
  std::size_t bench_iterations = 100;

  bool uses_stub() const { return embedder == "stub"; }
  std::string store_dir() const {
    return uses_stub() ? (std::filesystem::path(out_dir) / "stores").string() : embedder.substr(6);
  }
};

namespace detail {

inline bool parse_bool(const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("expected boolean, got '" + v + "'");
}

inline std::size_t parse_size(const std::string& v) {
  std::size_t pos = 0;
  try {
    const auto n = std::stoull(v, &pos);
    if (pos == v.size() && v.find('-') == std::string::npos) return static_cast<std::size_t>(n);
  } catch (const std::exception&) {
  }
  throw ConfigError("expected non-negative integer, got '" + v + "'");
}

inline float parse_float(const std::string& v) {
  std::size_t pos = 0;
  try {
    const float f = std::stof(v, &pos);
    if (pos == v.size()) return f;
  } catch (const std::exception&) {
  }
  throw ConfigError("expected number, got '" + v + "'");
}

inline std::string fmt_float(float f) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", static_cast<double>(f));
  return buf;
}

struct ConfigKey {
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

inline const std::map<std::string, ConfigKey>& config_keys() {
  using C = ExperimentConfig;
  auto sz = [](std::size_t C::*field) {
    return ConfigKey{[field](C& c, const std::string& v) { c.*field = parse_size(v); },
                     [field](const C& c) { return std::to_string(c.*field); }};
  };
  auto msz = [](std::size_t ModelConfig::*field) {
    return ConfigKey{[field](C& c, const std::string& v) { c.model.*field = parse_size(v); },
                     [field](const C& c) { return std::to_string(c.model.*field); }};
  };
  auto mbool = [](bool ModelConfig::*field) {
    return ConfigKey{[field](C& c, const std::string& v) { c.model.*field = parse_bool(v); },
                     [field](const C& c) { return std::string(c.model.*field ? "true" : "false"); }};
  };
  auto ofloat = [](float AdamWOptions::*field) {
    return ConfigKey{[field](C& c, const std::string& v) { c.train.optim.*field = parse_float(v); },
                     [field](const C& c) { return fmt_float(c.train.optim.*field); }};
  };
  auto tsz = [](std::size_t TrainOptions::*field) {
    return ConfigKey{[field](C& c, const std::string& v) { c.train.*field = parse_size(v); },
                     [field](const C& c) { return std::to_string(c.train.*field); }};
  };
  static const std::map<std::string, ConfigKey> keys = {
      {"dataset.path", {[](C& c, const std::string& v) { c.dataset_path = v; }, [](const C& c) { return c.dataset_path; }}},
      {"dataset.name", {[](C& c, const std::string& v) { c.dataset_name = v; }, [](const C& c) { return c.dataset_name; }}},
      {"dataset.frequency",
       {[](C& c, const std::string& v) { c.frequency = parse_frequency(v); },
        [](const C& c) { return std::string(frequency_code(c.frequency)); }}},
      {"dataset.split",
       {[](C& c, const std::string& v) { c.split = SplitRatio::parse(v); }, [](const C& c) { return c.split.str(); }}},
      {"dataset.drop_missing",
       {[](C& c, const std::string& v) { c.drop_missing = parse_bool(v); },
        [](const C& c) { return std::string(c.drop_missing ? "true" : "false"); }}},
      {"dataset.scale",
       {[](C& c, const std::string& v) { c.scale = parse_bool(v); },
        [](const C& c) { return std::string(c.scale ? "true" : "false"); }}},
      {"lookback", sz(&C::lookback)},
      {"horizon", sz(&C::horizon)},
      {"prompt.design",
       {[](C& c, const std::string& v) { c.design = parse_prompt_design(v); },
        [](const C& c) { return prompt_design_name(c.design); }}},
      {"prompt.decimals",
       {[](C& c, const std::string& v) { c.decimals = static_cast<int>(parse_size(v)); },
        [](const C& c) { return std::to_string(c.decimals); }}},
      {"embedder",
       {[](C& c, const std::string& v) {
          if (v != "stub" && v.rfind("store:", 0) != 0) throw ConfigError("embedder must be 'stub' or 'store:<dir>'");
          c.embedder = v;
        },
        [](const C& c) { return c.embedder; }}},
      {"model.ts_dim", msz(&ModelConfig::ts_dim)},
      {"model.prompt_dim", msz(&ModelConfig::prompt_dim)},
      {"model.layers_ts", msz(&ModelConfig::layers_ts)},
      {"model.layers_prompt", msz(&ModelConfig::layers_prompt)},
      {"model.layers_dec", msz(&ModelConfig::layers_dec)},
      {"model.heads", msz(&ModelConfig::heads)},
      {"model.ffn_ratio", msz(&ModelConfig::ffn_ratio)},
      {"model.lambda",
       {[](C& c, const std::string& v) { c.model.lambda = parse_float(v); },
        [](const C& c) { return fmt_float(c.model.lambda); }}},
      {"model.use_alignment", mbool(&ModelConfig::use_alignment)},
      {"model.use_prompt_projection", mbool(&ModelConfig::use_prompt_projection)},
      {"model.causal_decoder", mbool(&ModelConfig::causal_decoder)},
      {"train.epochs", tsz(&TrainOptions::epochs)},
      {"train.patience", tsz(&TrainOptions::patience)},
      {"train.batch_size", tsz(&TrainOptions::batch_size)},
      {"train.lr", ofloat(&AdamWOptions::lr)},
      {"train.beta1", ofloat(&AdamWOptions::beta1)},
      {"train.beta2", ofloat(&AdamWOptions::beta2)},
      {"train.eps", ofloat(&AdamWOptions::eps)},
      {"train.weight_decay", ofloat(&AdamWOptions::weight_decay)},
      {"seed",
       {[](C& c, const std::string& v) { c.seed = parse_size(v); }, [](const C& c) { return std::to_string(c.seed); }}},
      {"out_dir", {[](C& c, const std::string& v) { c.out_dir = v; }, [](const C& c) { return c.out_dir; }}},
      {"eval.dump_predictions",
       {[](C& c, const std::string& v) { c.dump_predictions = parse_bool(v); },
        [](const C& c) { return std::string(c.dump_predictions ? "true" : "false"); }}},
      {"bench.iterations", sz(&C::bench_iterations)},
  };
  return keys;
}

}  // namespace detail

inline void set_config_value(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
  const auto& keys = detail::config_keys();
  auto it = keys.find(key);
  if (it == keys.end()) throw ConfigError("unknown config key '" + key + "'");
  try {
    it->second.set(cfg, value);
  } catch (const ConfigError& e) {
    throw ConfigError(key + ": " + e.what());
  } catch (const ValidationError& e) {
    throw ConfigError(key + ": " + e.what());
  }
}

/// Parses `key = value` lines; '#' starts a comment. Relative dataset and
/// store paths resolve against `base_dir`.
inline ExperimentConfig parse_config(std::istream& in, const std::filesystem::path& base_dir = {}) {
  ExperimentConfig cfg;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto trimmed = std::string(detail::trim(line));
    if (trimmed.empty()) continue;
    const auto eq = trimmed.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    const std::string key(detail::trim(std::string_view(trimmed).substr(0, eq)));
    const std::string value(detail::trim(std::string_view(trimmed).substr(eq + 1)));
    try {
      set_config_value(cfg, key, value);
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (!base_dir.empty()) {
    auto resolve = [&](const std::string& p) {
      return p.empty() || std::filesystem::path(p).is_absolute() ? p : (base_dir / p).lexically_normal().string();
    };
    cfg.dataset_path = resolve(cfg.dataset_path);
    if (!cfg.uses_stub()) cfg.embedder = "store:" + resolve(cfg.embedder.substr(6));
  }
  return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  return parse_config(in, std::filesystem::path(path).parent_path());
}

/// Every effective setting as sorted `key = value` lines.
inline std::string canonical_config(const ExperimentConfig& cfg) {
  std::string out;
  for (const auto& [key, k] : detail::config_keys()) out += key + " = " + k.get(cfg) + "\n";
  return out;
}

inline std::string config_hash(const ExperimentConfig& cfg) { return hex64(fnv1a64(canonical_config(cfg))); }

// ---------------------------------------------------------------------------
// Data

struct ExperimentData {
  SeriesDataset dataset;  // scaled when cfg.scale
  SplitPlan plan;
  std::optional<StandardScaler> scaler;
  std::array<std::vector<TimeSeriesWindow>, 3> windows;  // train, val, test

  const std::vector<TimeSeriesWindow>& split(Split s) const { return windows[static_cast<std::size_t>(s)]; }
};

inline ExperimentData prepare_data(SeriesDataset ds, const ExperimentConfig& cfg) {
  ExperimentData d;
  d.plan = chronological_split(ds.length(), cfg.split, cfg.lookback, cfg.horizon);
  if (cfg.scale) {
    d.scaler = StandardScaler::fit(ds, std::max<std::size_t>(d.plan.train_end, 1));
    d.scaler->apply(ds);
  }
  d.windows[0] = make_windows(ds, d.plan.train, cfg.lookback, cfg.horizon);
  d.windows[1] = make_windows(ds, d.plan.val, cfg.lookback, cfg.horizon);
  d.windows[2] = make_windows(ds, d.plan.test, cfg.lookback, cfg.horizon);
  d.dataset = std::move(ds);
  return d;
}

inline ExperimentData load_experiment_data(const ExperimentConfig& cfg) {
  if (cfg.dataset_path.empty()) throw ConfigError("dataset.path is not set");
  if (!std::filesystem::exists(cfg.dataset_path)) throw ConfigError("dataset not found: " + cfg.dataset_path);
  CsvSchema schema{cfg.dataset_name, cfg.frequency, cfg.split, cfg.drop_missing};
  return prepare_data(load_csv(cfg.dataset_path, schema), cfg);
}

// ---------------------------------------------------------------------------
// gen-prompts

inline std::filesystem::path prompts_dir(const ExperimentConfig& cfg) {
  return std::filesystem::path(cfg.out_dir) / "prompts";
}

inline nlohmann::json prompt_to_json(const PromptRecord& p) {
  return {{"window_id", p.window_id}, {"variable_id", p.variable_id}, {"design", prompt_design_name(p.design)},
          {"text", p.text},           {"trend_value", p.trend_value}, {"mean", p.mean},
          {"stdev", p.stdev},         {"last_value", p.last_value},   {"value_count", p.value_count}};
}

inline PromptRecord prompt_from_json(const nlohmann::json& j) {
  PromptRecord p;
  j.at("window_id").get_to(p.window_id);
  j.at("variable_id").get_to(p.variable_id);
  p.design = parse_prompt_design(j.at("design").get<std::string>());
  j.at("text").get_to(p.text);
  p.trend_value = j.value("trend_value", 0.0);
  p.mean = j.value("mean", 0.0);
  p.stdev = j.value("stdev", 0.0);
  p.last_value = j.value("last_value", 0.0);
  p.value_count = j.value("value_count", std::size_t{0});
  return p;
}

struct GenPromptsResult {
  std::array<std::size_t, 3> records{};
  std::array<std::size_t, 3> windows{};
  std::filesystem::path manifest;
};

inline GenPromptsResult gen_prompts(const ExperimentConfig& cfg, const ExperimentData& data) {
  const auto dir = prompts_dir(cfg);
  std::filesystem::create_directories(dir);
  GenPromptsResult res;
  nlohmann::json manifest = {{"template_version", std::string(kTemplateVersion)},
                             {"template_hash", template_hash()},
                             {"dataset", cfg.dataset_name},
                             {"design", prompt_design_name(cfg.design)},
                             {"lookback", cfg.lookback},
                             {"horizon", cfg.horizon},
                             {"num_variables", data.dataset.num_variables()},
                             {"config_hash", config_hash(cfg)}};
  const ValueFormat fmt{cfg.decimals};
  for (auto s : kAllSplits) {
    const auto i = static_cast<std::size_t>(s);
    const auto prompts = render_all(data.split(s), cfg.design, fmt);
    const auto file = dir / (std::string("prompts_") + split_name(s) + ".jsonl");
    std::ofstream out(file, std::ios::trunc);
    if (!out) throw ConfigError("cannot write " + file.string());
    for (const auto& p : prompts) out << prompt_to_json(p).dump() << '\n';
    res.records[i] = prompts.size();
    res.windows[i] = data.split(s).size();
    manifest["splits"][split_name(s)] = {
        {"windows", res.windows[i]}, {"records", res.records[i]}, {"file", file.filename().string()}};
  }
  res.manifest = dir / "manifest.json";
  std::ofstream(res.manifest, std::ios::trunc) << manifest.dump(2) << '\n';
  return res;
}

inline GenPromptsResult cmd_gen_prompts(const ExperimentConfig& cfg) {
  return gen_prompts(cfg, load_experiment_data(cfg));
}

inline std::vector<PromptRecord> read_prompts(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("cannot open prompts " + file.string());
  std::vector<PromptRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) out.push_back(prompt_from_json(nlohmann::json::parse(line)));
  }
  return out;
}

// ---------------------------------------------------------------------------
// embed-stub

inline std::filesystem::path store_path(const ExperimentConfig& cfg, Split s) {
  return std::filesystem::path(cfg.store_dir()) / store_filename(cfg.dataset_name, split_name(s), cfg.lookback, cfg.design);
}

struct EmbedResult {
  std::array<std::filesystem::path, 3> stores;
};

/// Reads the prompt files listed in the manifest and writes one stub store per split.
inline EmbedResult cmd_embed_stub(const ExperimentConfig& cfg) {
  const auto dir = prompts_dir(cfg);
  std::ifstream mf(dir / "manifest.json");
  if (!mf) throw ConfigError("no prompt manifest in " + dir.string() + " (run gen-prompts first)");
  const auto manifest = nlohmann::json::parse(mf);
  if (manifest.at("template_hash").get<std::string>() != template_hash()) {
    throw ConfigError("prompt manifest was produced by a different template version");
  }
  const std::size_t n = manifest.at("num_variables").get<std::size_t>();
  std::filesystem::create_directories(cfg.store_dir());
  EmbedResult res;
  for (auto s : kAllSplits) {
    const auto& entry = manifest.at("splits").at(split_name(s));
    const std::size_t windows = entry.at("windows").get<std::size_t>();
    const auto prompts = read_prompts(dir / entry.at("file").get<std::string>());
    if (prompts.size() != windows * n || entry.at("records").get<std::size_t>() != prompts.size()) {
      throw StoreError(std::string(split_name(s)) + ": " + std::to_string(prompts.size()) +
                       " prompts do not match manifest dims " + std::to_string(windows) + " × " + std::to_string(n));
    }
    const auto block = stub_embed_all(prompts, windows, n, cfg.model.prompt_dim);
    res.stores[static_cast<std::size_t>(s)] = store_path(cfg, s);
    write_store(store_path(cfg, s).string(), block);
  }
  return res;
}

/// Loads the store for `s`, generating stub prompts and stores first when
/// the stub embedder is configured and they are missing.
inline EmbeddingBlock load_embeddings(const ExperimentConfig& cfg, const ExperimentData& data, Split s) {
  const auto path = store_path(cfg, s);
  if (!std::filesystem::exists(path)) {
    if (!cfg.uses_stub()) throw StoreError("missing embedding store " + path.string());
    gen_prompts(cfg, data);
    cmd_embed_stub(cfg);
  }
  const auto store = LastTokenStore::open(path.string());
  const auto& windows = data.split(s);
  if (store.num_windows() != windows.size() || store.num_variables() != data.dataset.num_variables()) {
    throw StoreError(path.string() + ": store dims " + std::to_string(store.num_windows()) + "×" +
                     std::to_string(store.num_variables()) + " do not match split " +
                     std::to_string(windows.size()) + "×" + std::to_string(data.dataset.num_variables()));
  }
  return store.read_all();
}

// ---------------------------------------------------------------------------
// train / eval / zeroshot / bench

inline std::filesystem::path checkpoint_path(const ExperimentConfig& cfg) {
  return std::filesystem::path(cfg.out_dir) / "checkpoint.tcmk";
}

struct TrainOutcome {
  TrainResult result;
  std::filesystem::path checkpoint;
  std::filesystem::path log;
};

inline void check_prompt_dim(const EmbeddingBlock& block, const ModelConfig& model) {
  if (block.embed_dim != model.prompt_dim) {
    throw StoreError("store embed_dim " + std::to_string(block.embed_dim) + " differs from model prompt_dim " +
                     std::to_string(model.prompt_dim));
  }
}

inline TrainOutcome cmd_train(const ExperimentConfig& cfg) {
  const auto data = load_experiment_data(cfg);
  ModelConfig mc = cfg.model;
  mc.num_variables = data.dataset.num_variables();
  mc.lookback = cfg.lookback;
  mc.horizon = cfg.horizon;
  TimeCMA model(mc, cfg.seed);

  const auto train_emb = load_embeddings(cfg, data, Split::Train);
  const auto val_emb = load_embeddings(cfg, data, Split::Val);
  check_prompt_dim(train_emb, mc);
  const auto train = prepare_split(data.split(Split::Train), train_emb);
  const auto val = prepare_split(data.split(Split::Val), val_emb);

  TrainOptions opts = cfg.train;
  opts.shuffle_seed = cfg.seed;
  std::filesystem::create_directories(cfg.out_dir);
  TrainOutcome out;
  out.log = std::filesystem::path(cfg.out_dir) / "train_log.jsonl";
  std::ofstream log(out.log, std::ios::trunc);
  const auto hash = config_hash(cfg);
  out.result = train_model(model, train, val, opts, [&](const EpochLog& row) {
    log << nlohmann::json{{"epoch", row.epoch}, {"train_loss", row.train_loss}, {"val_loss", row.val_loss},
                          {"config_hash", hash}}
               .dump()
        << '\n'
        << std::flush;
  });
  out.checkpoint = checkpoint_path(cfg);
  save_checkpoint(out.checkpoint.string(), model);
  return out;
}

inline std::string report_csv_header() {
  return "dataset,windows,mse,mae,persistence_mse,persistence_mae,seconds_per_window,param_count,"
         "peak_memory_mib,config_hash";
}

inline std::string report_csv_row(const std::string& dataset, const ForecastReport& r, const std::string& hash) {
  char buf[512];
  std::snprintf(buf, sizeof buf, "%s,%zu,%.6f,%.6f,%.6f,%.6f,%.6e,%zu,%.1f,%s", dataset.c_str(), r.windows, r.mse,
                r.mae, r.persistence_mse, r.persistence_mae, r.seconds_per_window, r.param_count, r.peak_memory_mib,
                hash.c_str());
  return buf;
}

inline void write_report(const std::filesystem::path& stem, const std::string& dataset, const ForecastReport& r,
                         const std::string& hash) {
  std::filesystem::create_directories(stem.parent_path());
  std::ofstream(stem.string() + ".csv", std::ios::trunc) << report_csv_header() << '\n'
                                                         << report_csv_row(dataset, r, hash) << '\n';
  nlohmann::json j = {{"dataset", dataset},
                      {"windows", r.windows},
                      {"mse", r.mse},
                      {"mae", r.mae},
                      {"persistence_mse", r.persistence_mse},
                      {"persistence_mae", r.persistence_mae},
                      {"seconds_per_window", r.seconds_per_window},
                      {"param_count", r.param_count},
                      {"peak_memory_mib", r.peak_memory_mib},
                      {"config_hash", hash}};
  std::ofstream(stem.string() + ".json", std::ios::trunc) << j.dump(2) << '\n';
}

inline void write_predictions(const std::filesystem::path& file, const ForecastReport& r,
                              const std::vector<TimeSeriesWindow>& windows) {
  std::ofstream out(file, std::ios::trunc);
  out << "window_id,step,variable,prediction,target\n";
  char buf[128];
  for (std::size_t w = 0; w < r.predictions.size(); ++w) {
    const auto& win = windows[w];
    for (std::size_t t = 0; t < win.horizon; ++t)
      for (std::size_t v = 0; v < win.num_variables; ++v) {
        std::snprintf(buf, sizeof buf, "%zu,%zu,%zu,%.9g,%.9g\n", win.window_id, t, v,
                      static_cast<double>(r.predictions[w][t * win.num_variables + v]),
                      static_cast<double>(win.target_at(t, v)));
        out << buf;
      }
  }
}

/// Evaluates `model` on the test split of `cfg`'s dataset with batch size 1.
inline ForecastReport evaluate_on_config(const TimeCMA& model, const ExperimentConfig& cfg) {
  if (model.config().lookback != cfg.lookback || model.config().horizon != cfg.horizon) {
    throw ConfigError("model expects lookback=" + std::to_string(model.config().lookback) + ", horizon=" +
                      std::to_string(model.config().horizon) + " but the dataset config has lookback=" +
                      std::to_string(cfg.lookback) + ", horizon=" + std::to_string(cfg.horizon) +
                      "; remap explicitly before transfer");
  }
  const auto data = load_experiment_data(cfg);
  if (!model.config().use_alignment) {
    const auto& w = data.split(Split::Test);
    EmbeddingBlock dummy(w.size(), data.dataset.num_variables(), model.config().prompt_dim);
    return evaluate(model, prepare_split(w, dummy), cfg.dump_predictions);
  }
  const auto emb = load_embeddings(cfg, data, Split::Test);
  check_prompt_dim(emb, model.config());
  return evaluate(model, prepare_split(data.split(Split::Test), emb), cfg.dump_predictions);
}

inline ForecastReport cmd_eval(const ExperimentConfig& cfg, const std::string& checkpoint) {
  const auto model = load_checkpoint(checkpoint);
  const auto report = evaluate_on_config(model, cfg);
  const auto stem = std::filesystem::path(cfg.out_dir) / "eval_report";
  write_report(stem, cfg.dataset_name, report, config_hash(cfg));
  if (cfg.dump_predictions) {
    write_predictions(std::filesystem::path(cfg.out_dir) / "predictions.csv", report,
                      load_experiment_data(cfg).split(Split::Test));
  }
  return report;
}

/// Evaluates a source checkpoint on the target dataset's test split with no
/// parameter updates. Target prompts and stores are built from target data.
inline ForecastReport cmd_zeroshot(const std::string& source_checkpoint, const ExperimentConfig& target) {
  const auto model = load_checkpoint(source_checkpoint);
  const auto report = evaluate_on_config(model, target);
  write_report(std::filesystem::path(target.out_dir) / "zeroshot_report", target.dataset_name, report,
               config_hash(target));
  return report;
}

struct BenchRow {
  std::string dataset;
  std::size_t param_count = 0;
  double param_millions = 0.0;
  double seconds_per_iter = 0.0;
  std::size_t iterations = 0;
  double peak_memory_mib = 0.0;
};

inline std::string bench_csv_header() { return "dataset,param_count,param_m,seconds_per_iter,iterations,peak_memory_mib"; }

inline std::string bench_csv_row(const BenchRow& b) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%s,%zu,%.4f,%.6e,%zu,%.1f", b.dataset.c_str(), b.param_count, b.param_millions,
                b.seconds_per_iter, b.iterations, b.peak_memory_mib);
  return buf;
}

/// Batch-size-1 inference timing over at least `bench_iterations` windows
/// (test windows cycled), excluding store I/O.
inline BenchRow cmd_bench(const ExperimentConfig& cfg, const std::string& checkpoint) {
  const auto model = load_checkpoint(checkpoint);
  const auto data = load_experiment_data(cfg);
  const auto& windows = data.split(Split::Test);
  if (windows.empty()) throw ConfigError("bench needs at least one test window");
  EmbeddingBlock emb = model.config().use_alignment
                           ? load_embeddings(cfg, data, Split::Test)
                           : EmbeddingBlock(windows.size(), data.dataset.num_variables(), model.config().prompt_dim);
  const auto split = prepare_split(windows, emb);
  const std::size_t iters = std::max<std::size_t>(cfg.bench_iterations, 1);
  NoGradGuard no_grad;
  const auto t0 = std::chrono::steady_clock::now();
  for (std::size_t i = 0; i < iters; ++i) {
    const auto k = i % split.size();
    (void)model.forward(split.inputs[k], split.prompts[k]);
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  BenchRow row{cfg.dataset_name, model.count_params(), static_cast<double>(model.count_params()) / 1e6,
               secs / static_cast<double>(iters), iters, peak_rss_mib()};
  std::filesystem::create_directories(cfg.out_dir);
  std::ofstream(std::filesystem::path(cfg.out_dir) / "bench.csv", std::ios::trunc) << bench_csv_header() << '\n'
                                                                                   << bench_csv_row(row) << '\n';
  return row;
}

/// Human-readable summary of a store; validates the checksum on open.
inline std::string cmd_inspect_store(const std::string& path, std::optional<EmbedKey> key = std::nullopt) {
  const auto store = LastTokenStore::open(path);
  std::ostringstream os;
  os << "store: " << path << '\n'
     << "version: " << store.version() << '\n'
     << "dtype: f32\n"
     << "windows: " << store.num_windows() << '\n'
     << "variables: " << store.num_variables() << '\n'
     << "embed_dim: " << store.embed_dim() << '\n'
     << "checksum: " << hex64(store.checksum()) << " (ok)\n";
  if (key) {
    const auto v = store.read_vector(*key);
    os << "vector(" << key->window_id << ", " << key->variable_id << "):";
    char buf[32];
    for (float x : v) {
      std::snprintf(buf, sizeof buf, " %.9g", static_cast<double>(x));
      os << buf;
    }
    os << '\n';
  }
  return os.str();
}

}  // namespace timecma
