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

// Checkpoint layout (little-endian):
//   "TCMACKPT" | u32 version | u64 seed | str config_json | u32 count |
//   count × (str name | u8 kind | u32 rank | u64 dims[rank] | f32 values) |
//   u64 FNV-1a of every preceding byte
// where str is a u32 length followed by UTF-8 bytes.

#pragma once

#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "json.hpp"
#include "timecma/hash.hpp"
#include "timecma/model.hpp"

namespace timecma {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr char kCheckpointMagic[8] = {'T', 'C', 'M', 'A', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

inline nlohmann::json to_json(const ModelConfig& c) {
  return {{"num_variables", c.num_variables}, {"lookback", c.lookback},
          {"horizon", c.horizon},             {"ts_dim", c.ts_dim},
          {"prompt_dim", c.prompt_dim},       {"layers_ts", c.layers_ts},
          {"layers_prompt", c.layers_prompt}, {"layers_dec", c.layers_dec},
          {"heads", c.heads},                 {"ffn_ratio", c.ffn_ratio},
          {"lambda", c.lambda},               {"use_alignment", c.use_alignment},
          {"use_prompt_projection", c.use_prompt_projection},
          {"causal_decoder", c.causal_decoder}};
}

inline ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  j.at("num_variables").get_to(c.num_variables);
  j.at("lookback").get_to(c.lookback);
  j.at("horizon").get_to(c.horizon);
  j.at("ts_dim").get_to(c.ts_dim);
  j.at("prompt_dim").get_to(c.prompt_dim);
  j.at("layers_ts").get_to(c.layers_ts);
  j.at("layers_prompt").get_to(c.layers_prompt);
  j.at("layers_dec").get_to(c.layers_dec);
  j.at("heads").get_to(c.heads);
  j.at("ffn_ratio").get_to(c.ffn_ratio);
  j.at("lambda").get_to(c.lambda);
  j.at("use_alignment").get_to(c.use_alignment);
  j.at("use_prompt_projection").get_to(c.use_prompt_projection);
  j.at("causal_decoder").get_to(c.causal_decoder);
  return c;
}

inline std::vector<std::uint8_t> encode_checkpoint(const TimeCMA& model) {
  std::vector<std::uint8_t> out(std::begin(kCheckpointMagic), std::end(kCheckpointMagic));
  le::put<std::uint32_t>(out, kCheckpointVersion);
  le::put<std::uint64_t>(out, model.params().seed());
  le::put_string(out, to_json(model.config()).dump());
  le::put<std::uint32_t>(out, static_cast<std::uint32_t>(model.params().size()));
  for (const auto& e : model.params()) {
    le::put_string(out, e.name);
    le::put<std::uint8_t>(out, static_cast<std::uint8_t>(e.kind));
    le::put<std::uint32_t>(out, static_cast<std::uint32_t>(e.value.rank()));
    for (auto d : e.value.shape()) le::put<std::uint64_t>(out, d);
    le::put_floats(out, e.value.data());
  }
  le::put<std::uint64_t>(out, fnv1a64(std::span<const std::uint8_t>(out)));
  return out;
}

inline TimeCMA decode_checkpoint(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < sizeof(kCheckpointMagic) + 8 ||
      !std::equal(std::begin(kCheckpointMagic), std::end(kCheckpointMagic), bytes.begin())) {
    throw CheckpointError("not a TimeCMA checkpoint");
  }
  const auto body = bytes.first(bytes.size() - 8);
  le::Reader tail(bytes.last(8));
  if (fnv1a64(body) != tail.get<std::uint64_t>()) throw CheckpointError("checkpoint checksum mismatch");
  try {
    le::Reader r(body.subspan(sizeof(kCheckpointMagic)));
    const auto version = r.get<std::uint32_t>();
    if (version != kCheckpointVersion) {
      throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
    }
    const auto seed = r.get<std::uint64_t>();
    const auto config = model_config_from_json(nlohmann::json::parse(r.get_string()));
    TimeCMA model(config, seed);
    const auto count = r.get<std::uint32_t>();
    if (count != model.params().size()) {
      throw CheckpointError("checkpoint holds " + std::to_string(count) + " tensors, config implies " +
                            std::to_string(model.params().size()));
    }
    for (std::uint32_t i = 0; i < count; ++i) {
      const auto name = r.get_string();
      r.get<std::uint8_t>();
      const auto rank = r.get<std::uint32_t>();
      Shape shape(rank);
      for (auto& d : shape) d = r.get<std::uint64_t>();
      Tensor target = model.params().get(name);
      if (target.shape() != shape) {
        throw CheckpointError("shape mismatch for " + name + ": " + shape_str(shape) + " vs " +
                              shape_str(target.shape()));
      }
      r.get_floats(target.mutable_data());
    }
    return model;
  } catch (const std::runtime_error& e) {
    throw CheckpointError(std::string("malformed checkpoint: ") + e.what());
  } catch (const std::logic_error& e) {
    throw CheckpointError(std::string("malformed checkpoint: ") + e.what());
  }
}

inline void save_checkpoint(const std::string& path, const TimeCMA& model) {
  const auto bytes = encode_checkpoint(model);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw CheckpointError("cannot write " + path);
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

inline TimeCMA load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw CheckpointError("cannot open checkpoint " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

}  // namespace timecma
