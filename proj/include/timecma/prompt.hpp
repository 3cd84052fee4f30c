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

#include <array>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <regex>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "timecma/data.hpp"
#include "timecma/hash.hpp"

namespace timecma {

enum class PromptDesign { P1 = 1, P2, P3, P4, P5 };

inline PromptDesign parse_prompt_design(std::string_view s) {
  if (s.size() == 2 && (s[0] == 'P' || s[0] == 'p') && s[1] >= '1' && s[1] <= '5') {
    return static_cast<PromptDesign>(s[1] - '0');
  }
  throw ValidationError("prompt design must be one of P1..P5, got '" + std::string(s) + "'");
}

inline std::string prompt_design_name(PromptDesign d) {
  return "P" + std::to_string(static_cast<int>(d));
}

/// Designs whose text ends on a number (the last token summarizes the prompt).
inline bool ends_with_numeral(PromptDesign d) {
  return d == PromptDesign::P3 || d == PromptDesign::P4 || d == PromptDesign::P5;
}

// Canonical template strings. Changing any of them changes the template hash
// recorded in prompt manifests, which invalidates cached embedding stores.
inline constexpr std::string_view kTemplateVersion = "timecma-prompts/1";
inline constexpr std::array<std::string_view, 5> kPromptTemplates = {
    "From {start} to {end}, the values were {values} every {freq}.",
    "From {start} to {end}, the values were {values} every {freq}. "
    "Forecast the values for the next {horizon} steps.",
    "From {start} to {end}, the values were {values} every {freq}. "
    "The average value is {mean}",
    "The values were {values} recorded every {freq} from {start} to {end}",
    "From {start} to {end}, the values were {values} every {freq}. "
    "The total trend value is {trend}",
};

inline std::string_view prompt_template(PromptDesign d) {
  return kPromptTemplates[static_cast<std::size_t>(d) - 1];
}

/// 64-bit hash over the version tag and every template, hex-encoded.
inline std::string template_hash() {
  std::string all(kTemplateVersion);
  for (auto t : kPromptTemplates) {
    all.push_back('\n');
    all.append(t);
  }
  return hex64(fnv1a64(all));
}

struct ValueFormat {
  int decimals = 2;
};

struct PromptRecord {
  std::size_t window_id = 0;
  std::size_t variable_id = 0;
  PromptDesign design = PromptDesign::P5;
  std::string text;
  double trend_value = 0.0;
  std::size_t value_count = 0;
  // Summary of the rendered (normalized) values; consumed by the stub embedder.
  double mean = 0.0;
  double stdev = 0.0;
  double last_value = 0.0;
};

/// Total trend: the sum of consecutive differences (equal to last − first).
template <typename T>
double trend(std::span<const T> values) {
  if (values.size() < 2) throw ValidationError("trend needs at least two values");
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < values.size(); ++i) {
    total += static_cast<double>(values[i + 1]) - static_cast<double>(values[i]);
  }
  return total;
}

inline double trend(const std::vector<double>& values) { return trend(std::span<const double>(values)); }
inline double trend(const std::vector<float>& values) { return trend(std::span<const float>(values)); }

/// Fixed-point with `decimals` places; negative zero prints as zero.
inline std::string format_value(double v, const ValueFormat& fmt) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", fmt.decimals, v);
  std::string s(buf);
  if (s[0] == '-' && s.find_first_not_of("-0.") == std::string::npos) s.erase(0, 1);
  return s;
}

namespace detail {

inline void replace_all(std::string& s, std::string_view key, const std::string& value) {
  for (std::size_t pos = s.find(key); pos != std::string::npos; pos = s.find(key, pos + value.size())) {
    s.replace(pos, key.size(), value);
  }
}

}  // namespace detail

/// Renders one variable of one window. Values are the window's
/// instance-normalized lookback, so prompts are scale-free.
inline PromptRecord render(const TimeSeriesWindow& window, std::size_t variable_id,
                           PromptDesign design, const ValueFormat& fmt = {}) {
  if (variable_id >= window.num_variables) throw ValidationError("render: variable id out of range");
  const TimeSeriesWindow norm = window.normalized ? window : revin_normalize(window);
  std::vector<double> vals(norm.lookback_len);
  for (std::size_t t = 0; t < norm.lookback_len; ++t) vals[t] = norm.lookback_at(t, variable_id);

  PromptRecord rec;
  rec.window_id = window.window_id;
  rec.variable_id = variable_id;
  rec.design = design;
  rec.value_count = vals.size();
  rec.trend_value = trend(vals);
  double mu = 0.0;
  for (double v : vals) mu += v;
  mu /= static_cast<double>(vals.size());
  double var = 0.0;
  for (double v : vals) var += (v - mu) * (v - mu);
  rec.mean = mu;
  rec.stdev = std::sqrt(var / static_cast<double>(vals.size()));
  rec.last_value = vals.back();

  std::string joined;
  for (std::size_t i = 0; i < vals.size(); ++i) {
    if (i) joined += ", ";
    joined += format_value(vals[i], fmt);
  }
  std::string text(prompt_template(design));
  detail::replace_all(text, "{start}", format_timestamp(window.start_time, window.frequency));
  detail::replace_all(text, "{end}", format_timestamp(window.end_time, window.frequency));
  detail::replace_all(text, "{freq}", frequency_word(window.frequency));
  detail::replace_all(text, "{horizon}", std::to_string(window.horizon));
  detail::replace_all(text, "{mean}", format_value(mu, fmt));
  detail::replace_all(text, "{trend}", format_value(rec.trend_value, fmt));
  detail::replace_all(text, "{values}", joined);
  rec.text = std::move(text);
  return rec;
}

/// Window-major, variable-minor stream of prompts.
inline std::vector<PromptRecord> render_all(const std::vector<TimeSeriesWindow>& windows,
                                            PromptDesign design, const ValueFormat& fmt = {}) {
  std::vector<PromptRecord> out;
  if (windows.empty()) return out;
  out.reserve(windows.size() * windows.front().num_variables);
  for (const auto& w : windows)
    for (std::size_t v = 0; v < w.num_variables; ++v) out.push_back(render(w, v, design, fmt));
  return out;
}

/// Final whitespace-delimited token of `text`, stripped of trailing punctuation.
inline std::string last_token(std::string_view text) {
  while (!text.empty() && std::isspace(static_cast<unsigned char>(text.back()))) text.remove_suffix(1);
  const auto pos = text.find_last_of(" \t\n");
  return std::string(pos == std::string_view::npos ? text : text.substr(pos + 1));
}

/// True when the final token is a numeral: a signed decimal, or a date/time
/// made of digit groups.
inline bool last_token_is_numeral(std::string_view text) {
  static const std::regex numeral(R"(^[+-]?\d+(?:[.:\-/]\d+)*$)");
  return std::regex_match(last_token(text), numeral);
}

}  // namespace timecma
