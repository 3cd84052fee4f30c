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

// Last-token embedding store.
//
// Byte layout (all integers and floats little-endian):
//
//   offset  size  field
//   0       4     magic "TCMA"
//   4       2     version (u16, currently 1)
//   6       2     dtype tag (u16, 1 = f32)
//   8       4     embed_dim E (u32)
//   12      4     num_variables N (u32)
//   16      8     num_windows W (u64)
//   24      4·W·N·E payload, window-major then variable-major
//   24+4WNE 8     FNV-1a 64 checksum of the payload bytes (u64)
//
// The vector for (w, v) starts at byte 24 + 4·E·(w·N + v).

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "timecma/hash.hpp"
#include "timecma/prompt.hpp"

namespace timecma {

class StoreError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr char kStoreMagic[4] = {'T', 'C', 'M', 'A'};
inline constexpr std::uint16_t kStoreVersion = 1;
inline constexpr std::uint16_t kDtypeF32 = 1;
inline constexpr std::size_t kStoreHeaderBytes = 24;
inline constexpr std::size_t kStoreTrailerBytes = 8;

struct EmbedKey {
  std::size_t window_id = 0;
  std::size_t variable_id = 0;
};

/// Dense [windows][variables][embed_dim] block of f32 embeddings.
struct EmbeddingBlock {
  std::size_t num_windows = 0;
  std::size_t num_variables = 0;
  std::size_t embed_dim = 0;
  std::vector<float> values;

  EmbeddingBlock() = default;
  EmbeddingBlock(std::size_t w, std::size_t n, std::size_t e)
      : num_windows(w), num_variables(n), embed_dim(e), values(w * n * e, 0.0f) {}

  std::size_t offset(EmbedKey k) const { return embed_dim * (k.window_id * num_variables + k.variable_id); }

  std::span<float> at(EmbedKey k) { return {values.data() + offset(k), embed_dim}; }
  std::span<const float> at(EmbedKey k) const { return {values.data() + offset(k), embed_dim}; }

  /// The N×E slab for one window.
  std::span<const float> window(std::size_t w) const {
    return {values.data() + w * num_variables * embed_dim, num_variables * embed_dim};
  }

  void validate() const {
    if (values.size() != num_windows * num_variables * embed_dim) {
      throw StoreError("embedding block holds " + std::to_string(values.size()) + " floats, dims imply " +
                       std::to_string(num_windows * num_variables * embed_dim));
    }
  }
};

inline std::size_t expected_store_size(std::size_t w, std::size_t n, std::size_t e) {
  return kStoreHeaderBytes + 4 * w * n * e + kStoreTrailerBytes;
}

inline std::vector<std::uint8_t> encode_store(const EmbeddingBlock& block) {
  block.validate();
  if (block.embed_dim == 0 || block.num_variables == 0) throw StoreError("store dims must be positive");
  std::vector<std::uint8_t> out;
  out.reserve(expected_store_size(block.num_windows, block.num_variables, block.embed_dim));
  out.insert(out.end(), std::begin(kStoreMagic), std::end(kStoreMagic));
  le::put<std::uint16_t>(out, kStoreVersion);
  le::put<std::uint16_t>(out, kDtypeF32);
  le::put<std::uint32_t>(out, static_cast<std::uint32_t>(block.embed_dim));
  le::put<std::uint32_t>(out, static_cast<std::uint32_t>(block.num_variables));
  le::put<std::uint64_t>(out, static_cast<std::uint64_t>(block.num_windows));
  le::put_floats(out, block.values);
  const auto payload = std::span(out).subspan(kStoreHeaderBytes);
  le::put<std::uint64_t>(out, fnv1a64(payload));
  return out;
}

inline void write_store(const std::string& path, const EmbeddingBlock& block) {
  const auto bytes = encode_store(block);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw StoreError("cannot open " + path + " for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw StoreError("write failed for " + path);
}

/// Read-only view of a store. The file is loaded and its checksum verified
/// on open; lookups are offset arithmetic afterwards.
class LastTokenStore {
 public:
  static LastTokenStore from_bytes(std::vector<std::uint8_t> bytes) {
    LastTokenStore s;
    if (bytes.size() < kStoreHeaderBytes + kStoreTrailerBytes) throw StoreError("store too small");
    if (!std::equal(std::begin(kStoreMagic), std::end(kStoreMagic), bytes.begin())) {
      throw StoreError("bad magic: not a TCMA store");
    }
    le::Reader r(bytes);
    r.get<std::uint32_t>();
    s.version_ = r.get<std::uint16_t>();
    const auto dtype = r.get<std::uint16_t>();
    s.embed_dim_ = r.get<std::uint32_t>();
    s.num_variables_ = r.get<std::uint32_t>();
    s.num_windows_ = r.get<std::uint64_t>();
    if (s.version_ != kStoreVersion) throw StoreError("unsupported store version " + std::to_string(s.version_));
    if (dtype != kDtypeF32) throw StoreError("unsupported dtype tag " + std::to_string(dtype));
    if (s.embed_dim_ == 0 || s.num_variables_ == 0) throw StoreError("store dims must be positive");
    // Checked arithmetic: a corrupted window count must not wrap around to
    // the real file size.
    std::size_t payload_floats = 0, expected = 0;
    if (__builtin_mul_overflow(s.num_windows_, s.num_variables_ * s.embed_dim_, &payload_floats) ||
        __builtin_mul_overflow(payload_floats, std::size_t{4}, &expected) ||
        __builtin_add_overflow(expected, kStoreHeaderBytes + kStoreTrailerBytes, &expected)) {
      throw StoreError("store header dims overflow (" + std::to_string(s.num_windows_) + " windows)");
    }
    if (bytes.size() != expected) {
      throw StoreError("store size " + std::to_string(bytes.size()) + " does not match header (" +
                       std::to_string(expected) + ")");
    }
    const std::size_t payload_bytes = bytes.size() - kStoreHeaderBytes - kStoreTrailerBytes;
    const auto payload = std::span<const std::uint8_t>(bytes).subspan(kStoreHeaderBytes, payload_bytes);
    le::Reader tail(std::span<const std::uint8_t>(bytes).subspan(kStoreHeaderBytes + payload_bytes));
    const auto stored = tail.get<std::uint64_t>();
    if (fnv1a64(payload) != stored) throw StoreError("store checksum mismatch (corrupted payload)");
    s.bytes_ = std::move(bytes);
    return s;
  }

  static LastTokenStore open(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw StoreError("cannot open store " + path);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    try {
      return from_bytes(std::move(bytes));
    } catch (const StoreError& e) {
      throw StoreError(path + ": " + e.what());
    }
  }

  std::uint16_t version() const { return version_; }
  std::size_t embed_dim() const { return embed_dim_; }
  std::size_t num_variables() const { return num_variables_; }
  std::size_t num_windows() const { return num_windows_; }
  std::uint64_t checksum() const {
    le::Reader tail(std::span<const std::uint8_t>(bytes_).subspan(bytes_.size() - kStoreTrailerBytes));
    return tail.get<std::uint64_t>();
  }

  std::size_t byte_offset(EmbedKey k) const {
    return kStoreHeaderBytes + 4 * embed_dim_ * (k.window_id * num_variables_ + k.variable_id);
  }

  std::vector<float> read_vector(EmbedKey k) const {
    if (k.window_id >= num_windows_ || k.variable_id >= num_variables_) {
      throw StoreError("key (" + std::to_string(k.window_id) + ", " + std::to_string(k.variable_id) +
                       ") out of range for store with " + std::to_string(num_windows_) + " windows × " +
                       std::to_string(num_variables_) + " variables");
    }
    std::vector<float> out(embed_dim_);
    le::Reader r(std::span<const std::uint8_t>(bytes_).subspan(byte_offset(k), 4 * embed_dim_));
    r.get_floats(out);
    return out;
  }

  EmbeddingBlock read_all() const {
    EmbeddingBlock b(num_windows_, num_variables_, embed_dim_);
    le::Reader r(std::span<const std::uint8_t>(bytes_).subspan(kStoreHeaderBytes, b.values.size() * 4));
    r.get_floats(b.values);
    return b;
  }

 private:
  LastTokenStore() = default;
  std::vector<std::uint8_t> bytes_;
  std::uint16_t version_ = 0;
  std::size_t embed_dim_ = 0;
  std::size_t num_variables_ = 0;
  std::size_t num_windows_ = 0;
};

/// `<dataset>_<split>_T<lookback>_<design>.tcma`
inline std::string store_filename(const std::string& dataset, const std::string& split, std::size_t lookback,
                                  PromptDesign design) {
  return dataset + "_" + split + "_T" + std::to_string(lookback) + "_" + prompt_design_name(design) + ".tcma";
}

inline constexpr std::size_t kStubFeatureSlots = 4;
inline constexpr float kStubClip = 10.0f;

/// Deterministic stand-in for the frozen language model.
///
/// Slots 0..3 hold (trend, mean, std, last value) of the rendered series,
/// clipped to ±10. The remaining slots are unit-variance uniforms drawn from
/// an mt19937_64 seeded with the FNV-1a hash of the prompt text, so the
/// vector is a function of the text bytes alone.
inline std::vector<float> stub_embed(const PromptRecord& prompt, std::size_t embed_dim) {
  if (embed_dim < 8) throw StoreError("stub embedder needs embed_dim >= 8");
  std::vector<float> out(embed_dim);
  const auto clip = [](double v) {
    return static_cast<float>(std::clamp(v, -static_cast<double>(kStubClip), static_cast<double>(kStubClip)));
  };
  out[0] = clip(prompt.trend_value);
  out[1] = clip(prompt.mean);
  out[2] = clip(prompt.stdev);
  out[3] = clip(prompt.last_value);
  std::mt19937_64 gen(fnv1a64(prompt.text));
  const float half_width = std::sqrt(3.0f);
  for (std::size_t i = kStubFeatureSlots; i < embed_dim; ++i) {
    const float u = static_cast<float>(gen() >> 40) * 0x1.0p-24f;
    out[i] = (2.0f * u - 1.0f) * half_width;
  }
  return out;
}

/// Stub embeddings for a window-major prompt stream.
inline EmbeddingBlock stub_embed_all(const std::vector<PromptRecord>& prompts, std::size_t num_windows,
                                     std::size_t num_variables, std::size_t embed_dim) {
  if (prompts.size() != num_windows * num_variables) {
    throw StoreError("prompt count " + std::to_string(prompts.size()) + " does not match " +
                     std::to_string(num_windows) + " windows × " + std::to_string(num_variables) + " variables");
  }
  EmbeddingBlock block(num_windows, num_variables, embed_dim);
  for (const auto& p : prompts) {
    if (p.window_id >= num_windows || p.variable_id >= num_variables) {
      throw StoreError("prompt key out of range");
    }
    const auto v = stub_embed(p, embed_dim);
    std::copy(v.begin(), v.end(), block.at({p.window_id, p.variable_id}).begin());
  }
  return block;
}

}  // namespace timecma
