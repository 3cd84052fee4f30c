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

// Seeded stand-ins for the public benchmarks, matching their shapes
// (length, variable count, frequency, split) and broad dynamics. Used by the
// test suites and by `timecma synth` when the real CSVs are not at hand.

#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "timecma/data.hpp"
#include "timecma/params.hpp"

namespace timecma::synthetic {

namespace detail {

inline SeriesDataset empty_dataset(std::string name, std::vector<std::string> vars, Frequency f, SplitRatio split,
                                   Timestamp start, std::size_t length) {
  SeriesDataset ds;
  ds.name = std::move(name);
  ds.variable_names = std::move(vars);
  ds.frequency = f;
  ds.split = split;
  ds.values.assign(length * ds.variable_names.size(), 0.0f);
  Timestamp t = start;
  for (std::size_t i = 0; i < length; ++i) {
    ds.times.push_back(t);
    t = advance(t, f);
  }
  return ds;
}

}  // namespace detail

/// Weekly influenza-like-illness surveillance: 966 weeks × 7 variables.
/// Winter epidemics with season-to-season variation in timing, height and
/// width, a growing reporting network, and count variables derived from the
/// rate and the network size.
inline SeriesDataset ili(std::uint64_t seed = 9, std::size_t length = 966) {
  auto ds = detail::empty_dataset(
      "ili", {"% WEIGHTED ILI", "%UNWEIGHTED ILI", "AGE 0-4", "AGE 5-24", "ILITOTAL", "NUM. OF PROVIDERS", "OT"},
      Frequency::Week1, {7, 1, 2}, {2002, 1, 1}, length);
  Rng rng(seed);
  const double year = 52.1775;
  struct Season {
    double peak, height, width;
  };
  std::vector<Season> seasons;
  for (int k = -1; k * year < static_cast<double>(length) + year; ++k) {
    const double peak = k * year + 58.0 + 3.0 * rng.normal();
    const double height = (1.4 + 0.12 * std::max(k, 0)) * std::exp(0.3 * rng.normal());
    const double width = 4.5 + 1.2 * std::abs(rng.normal());
    seasons.push_back({peak, height, width});
  }
  double noise = 0.0;
  double providers = 1600.0;
  for (std::size_t t = 0; t < length; ++t) {
    const double td = static_cast<double>(t);
    double rate = 1.0 + 0.25 * std::cos(2.0 * M_PI * (td - 58.0) / year);
    for (const auto& s : seasons) {
      const double z = (td - s.peak) / s.width;
      rate += s.height * std::exp(-0.5 * z * z);
    }
    noise = 0.6 * noise + 0.04 * rng.normal();
    rate = std::max(0.2, rate + noise);
    providers += 1.6 + 6.0 * rng.normal();
    const double visits = providers * (38.0 + 1.5 * rng.normal());
    const double ili_total = rate / 100.0 * visits;
    const double young = ili_total * (0.28 + 0.01 * rng.normal());
    const double school = ili_total * (0.36 + 0.015 * rng.normal());
    const double vals[7] = {rate,  rate * (0.94 + 0.01 * rng.normal()), young, school, ili_total,
                            providers, visits};
    for (std::size_t v = 0; v < 7; ++v) ds.value(t, v) = static_cast<float>(vals[v]);
  }
  return ds;
}

/// Hourly electricity-transformer style series: six load channels with daily
/// and weekly cycles plus a slowly drifting oil temperature. `variant` 1 and
/// 2 give two related but distinct stations.
inline SeriesDataset ett_hourly(int variant = 1, std::size_t length = 14400, std::uint64_t seed = 11) {
  auto ds = detail::empty_dataset("etth" + std::to_string(variant),
                                  {"HUFL", "HULL", "MUFL", "MULL", "LUFL", "LULL", "OT"}, Frequency::Hour1,
                                  {6, 2, 2}, {2016, 7, 1}, length);
  Rng rng(seed + static_cast<std::uint64_t>(variant) * 1000);
  const double amp = variant == 1 ? 1.0 : 1.6;
  const double phase = variant == 1 ? 0.0 : 1.3;
  std::vector<double> state(6, 0.0);
  double drift = 0.0, ot = 20.0;
  for (std::size_t t = 0; t < length; ++t) {
    const double td = static_cast<double>(t);
    const double daily = std::sin(2.0 * M_PI * td / 24.0 + phase);
    const double weekly = std::sin(2.0 * M_PI * td / 168.0);
    drift = 0.999 * drift + 0.05 * rng.normal();
    double load_sum = 0.0;
    for (std::size_t v = 0; v < 6; ++v) {
      state[v] = 0.8 * state[v] + 0.3 * rng.normal();
      const double base = (v % 2 == 0 ? 6.0 : 2.0) * amp;
      const double val = base + amp * (1.5 - 0.2 * v) * daily + 0.6 * weekly + drift + state[v];
      ds.value(t, v) = static_cast<float>(val);
      load_sum += val;
    }
    const double season = 8.0 * std::sin(2.0 * M_PI * td / (24.0 * 365.0) + phase);
    ot = 0.97 * ot + 0.03 * (15.0 + season + 0.4 * load_sum / 6.0) + 0.2 * rng.normal();
    ds.value(t, 6) = static_cast<float>(ot);
  }
  return ds;
}

/// Monthly macro panel: 728 months × (107 + `incomplete`) series, where the
/// last `incomplete` columns contain gaps (NaN) and are dropped on load.
inline SeriesDataset fred_md(std::size_t incomplete = 20, std::uint64_t seed = 13, std::size_t length = 728) {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < 107 + incomplete; ++i) names.push_back("S" + std::to_string(i + 1));
  auto ds = detail::empty_dataset("fred-md", names, Frequency::Month1, {7, 1, 2}, {1959, 1, 1}, length);
  Rng rng(seed);
  std::vector<double> level(names.size()), growth(names.size());
  for (auto& g : growth) g = 0.002 + 0.003 * rng.normal();
  double cycle = 0.0;
  for (std::size_t t = 0; t < length; ++t) {
    cycle = 0.95 * cycle + 0.1 * rng.normal();
    for (std::size_t v = 0; v < names.size(); ++v) {
      level[v] += growth[v] + 0.3 * cycle * ((v % 3) - 1.0) + 0.01 * rng.normal();
      float val = static_cast<float>(100.0 * std::exp(level[v]));
      if (v >= 107 && (t + v) % 97 == 0) val = std::numeric_limits<float>::quiet_NaN();
      ds.value(t, v) = val;
    }
  }
  return ds;
}

/// Independent AR(1) channels, hourly.
inline SeriesDataset ar1(std::size_t length, std::size_t num_variables, double phi = 0.9, std::uint64_t seed = 3) {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < num_variables; ++i) names.push_back("x" + std::to_string(i));
  auto ds = detail::empty_dataset("ar1", names, Frequency::Hour1, {7, 1, 2}, {2020, 1, 1}, length);
  Rng rng(seed);
  std::vector<double> x(num_variables, 0.0);
  for (std::size_t t = 0; t < length; ++t)
    for (std::size_t v = 0; v < num_variables; ++v) {
      x[v] = phi * x[v] + rng.normal();
      ds.value(t, v) = static_cast<float>(x[v]);
    }
  return ds;
}

}  // namespace timecma::synthetic
