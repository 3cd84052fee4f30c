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
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace timecma {

class LoadError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Frequency { Min10, Min15, Hour1, Week1, Month1 };

inline Frequency parse_frequency(std::string_view s) {
  if (s == "10min") return Frequency::Min10;
  if (s == "15min") return Frequency::Min15;
  if (s == "1h" || s == "1hour") return Frequency::Hour1;
  if (s == "1w" || s == "1week") return Frequency::Week1;
  if (s == "1m" || s == "1month") return Frequency::Month1;
  throw ValidationError("unknown frequency '" + std::string(s) + "' (expected 10min|15min|1h|1w|1m)");
}

inline const char* frequency_code(Frequency f) {
  switch (f) {
    case Frequency::Min10: return "10min";
    case Frequency::Min15: return "15min";
    case Frequency::Hour1: return "1h";
    case Frequency::Week1: return "1w";
    case Frequency::Month1: return "1m";
  }
  return "?";
}

/// Word used inside prompts ("every <word>").
inline const char* frequency_word(Frequency f) {
  switch (f) {
    case Frequency::Min10: return "10 minutes";
    case Frequency::Min15: return "15 minutes";
    case Frequency::Hour1: return "hour";
    case Frequency::Week1: return "week";
    case Frequency::Month1: return "month";
  }
  return "?";
}

inline bool is_sub_daily(Frequency f) {
  return f == Frequency::Min10 || f == Frequency::Min15 || f == Frequency::Hour1;
}

struct Timestamp {
  int year = 1970, month = 1, day = 1, hour = 0, minute = 0, second = 0;

  // Days since 1970-01-01 (proleptic Gregorian).
  std::int64_t days() const {
    const int y = year - (month <= 2);
    const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned mp = static_cast<unsigned>(month + (month > 2 ? -3 : 9));
    const unsigned doy = (153 * mp + 2) / 5 + static_cast<unsigned>(day) - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
  }

  std::int64_t seconds() const {
    return days() * 86400 + hour * 3600 + minute * 60 + second;
  }

  static Timestamp from_seconds(std::int64_t secs) {
    std::int64_t z = (secs >= 0 ? secs : secs - 86399) / 86400;
    const std::int64_t rem = secs - z * 86400;
    z += 719468;
    const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    Timestamp t;
    t.day = static_cast<int>(doy - (153 * mp + 2) / 5 + 1);
    t.month = static_cast<int>(mp < 10 ? mp + 3 : mp - 9);
    t.year = static_cast<int>(yoe + era * 400 + (t.month <= 2));
    t.hour = static_cast<int>(rem / 3600);
    t.minute = static_cast<int>((rem % 3600) / 60);
    t.second = static_cast<int>(rem % 60);
    return t;
  }

  int month_index() const { return year * 12 + (month - 1); }

  bool operator==(const Timestamp&) const = default;
};

/// Accepts "YYYY-MM-DD", "YYYY-MM-DD HH:MM[:SS]", "YYYY-MM-DDTHH:MM[:SS]"
/// and "M/D/YYYY".
inline std::optional<Timestamp> parse_timestamp(std::string_view s) {
  Timestamp t;
  int matched = 0;
  char sep = 0;
  std::string buf(s);
  if (buf.find('/') != std::string::npos) {
    matched = std::sscanf(buf.c_str(), "%d/%d/%d", &t.month, &t.day, &t.year);
    if (matched != 3) return std::nullopt;
  } else {
    matched = std::sscanf(buf.c_str(), "%d-%d-%d%c%d:%d:%d", &t.year, &t.month, &t.day, &sep,
                          &t.hour, &t.minute, &t.second);
    if (matched < 3 || (matched > 3 && sep != ' ' && sep != 'T') || matched == 4 || matched == 5) {
      return std::nullopt;
    }
  }
  if (t.month < 1 || t.month > 12 || t.day < 1 || t.day > 31 || t.hour < 0 || t.hour > 23 ||
      t.minute < 0 || t.minute > 59 || t.second < 0 || t.second > 60) {
    return std::nullopt;
  }
  return t;
}

/// ISO-8601 date, plus " HH:MM" for sub-daily frequencies.
inline std::string format_timestamp(const Timestamp& t, Frequency f) {
  char buf[32];
  if (is_sub_daily(f)) {
    std::snprintf(buf, sizeof buf, "%04d-%02d-%02d %02d:%02d", t.year, t.month, t.day, t.hour, t.minute);
  } else {
    std::snprintf(buf, sizeof buf, "%04d-%02d-%02d", t.year, t.month, t.day);
  }
  return buf;
}

inline Timestamp advance(const Timestamp& t, Frequency f, std::int64_t steps = 1) {
  switch (f) {
    case Frequency::Min10: return Timestamp::from_seconds(t.seconds() + steps * 600);
    case Frequency::Min15: return Timestamp::from_seconds(t.seconds() + steps * 900);
    case Frequency::Hour1: return Timestamp::from_seconds(t.seconds() + steps * 3600);
    case Frequency::Week1: return Timestamp::from_seconds(t.seconds() + steps * 7 * 86400);
    case Frequency::Month1: {
      Timestamp r = t;
      const int idx = t.month_index() + static_cast<int>(steps);
      r.year = idx / 12;
      r.month = idx % 12 + 1;
      return r;
    }
  }
  return t;
}

/// Train/val/test proportions in tenths, e.g. 7:1:2.
struct SplitRatio {
  int train = 7, val = 1, test = 2;

  void validate() const {
    if (train <= 0 || val < 0 || test < 0 || train + val + test != 10) {
      throw ValidationError("split ratio parts must be positive and sum to 10");
    }
  }

  static SplitRatio parse(std::string_view s) {
    SplitRatio r;
    if (std::sscanf(std::string(s).c_str(), "%d:%d:%d", &r.train, &r.val, &r.test) != 3) {
      throw ValidationError("split ratio must look like 7:1:2, got '" + std::string(s) + "'");
    }
    r.validate();
    return r;
  }

  std::string str() const {
    return std::to_string(train) + ":" + std::to_string(val) + ":" + std::to_string(test);
  }
};

/// L×N multivariate series, row-major (row = time step).
struct SeriesDataset {
  std::string name;
  std::vector<std::string> variable_names;
  std::vector<Timestamp> times;
  std::vector<float> values;
  Frequency frequency = Frequency::Hour1;
  SplitRatio split;

  std::size_t length() const { return times.size(); }
  std::size_t num_variables() const { return variable_names.size(); }
  float value(std::size_t row, std::size_t var) const { return values[row * num_variables() + var]; }
  float& value(std::size_t row, std::size_t var) { return values[row * num_variables() + var]; }
};

struct CsvSchema {
  std::string name;
  Frequency frequency = Frequency::Hour1;
  SplitRatio split;
  bool drop_missing = false;
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  bool quoted = false;
  for (char c : line) {
    if (c == '"') {
      quoted = !quoted;
    } else if (c == ',' && !quoted) {
      out.push_back(cell);
      cell.clear();
    } else if (c != '\r') {
      cell.push_back(c);
    }
  }
  out.push_back(cell);
  return out;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

inline bool is_missing_cell(std::string_view s) {
  return s.empty() || s == "NA" || s == "NaN" || s == "nan" || s == "null";
}

inline std::optional<double> parse_number(std::string_view s) {
  double v = 0.0;
  const auto* first = s.data();
  const auto* last = s.data() + s.size();
  if (!s.empty() && s.front() == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || !std::isfinite(v)) return std::nullopt;
  return v;
}

inline void check_uniform(const std::vector<Timestamp>& times, Frequency f) {
  for (std::size_t i = 1; i < times.size(); ++i) {
    if (!(advance(times[i - 1], f) == times[i])) {
      throw ValidationError("timestamps not uniform at frequency " + std::string(frequency_code(f)) +
                            " between data rows " + std::to_string(i) + " and " +
                            std::to_string(i + 1));
    }
  }
}

}  // namespace detail

/// Parses a CSV with a header row, a timestamp first column and one numeric
/// column per variable. Missing cells drop their column when
/// `schema.drop_missing` is set and are an error otherwise.
inline SeriesDataset parse_csv(std::istream& in, const CsvSchema& schema) {
  schema.split.validate();
  std::string line;
  if (!std::getline(in, line)) throw LoadError("empty CSV: missing header row");
  const auto header = detail::split_csv_line(line);
  if (header.size() < 2) throw LoadError("CSV header needs a date column and at least one variable");
  const std::size_t n_cols = header.size() - 1;

  SeriesDataset ds;
  ds.name = schema.name;
  ds.frequency = schema.frequency;
  ds.split = schema.split;
  std::vector<std::vector<double>> columns(n_cols);
  std::vector<bool> has_missing(n_cols, false);
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (detail::trim(line).empty()) continue;
    const auto cells = detail::split_csv_line(line);
    if (cells.size() != header.size()) {
      throw LoadError("row " + std::to_string(row) + ": expected " + std::to_string(header.size()) +
                      " cells, found " + std::to_string(cells.size()));
    }
    auto ts = parse_timestamp(detail::trim(cells[0]));
    if (!ts) throw LoadError("row " + std::to_string(row) + ", column 1: unparseable timestamp '" + cells[0] + "'");
    ds.times.push_back(*ts);
    for (std::size_t c = 0; c < n_cols; ++c) {
      const auto cell = detail::trim(cells[c + 1]);
      if (detail::is_missing_cell(cell)) {
        if (!schema.drop_missing) {
          throw LoadError("row " + std::to_string(row) + ", column " + std::to_string(c + 2) +
                          " ('" + header[c + 1] + "'): missing value");
        }
        has_missing[c] = true;
        columns[c].push_back(0.0);
        continue;
      }
      auto v = detail::parse_number(cell);
      if (!v) {
        throw LoadError("row " + std::to_string(row) + ", column " + std::to_string(c + 2) +
                        " ('" + header[c + 1] + "'): unparseable value '" + std::string(cell) + "'");
      }
      columns[c].push_back(*v);
    }
  }
  for (std::size_t i = 1; i < ds.times.size(); ++i) {
    if (ds.times[i].seconds() <= ds.times[i - 1].seconds()) {
      throw ValidationError("timestamps not strictly increasing at data row " + std::to_string(i + 1));
    }
  }
  detail::check_uniform(ds.times, ds.frequency);

  std::vector<std::size_t> kept;
  for (std::size_t c = 0; c < n_cols; ++c) {
    if (!has_missing[c]) kept.push_back(c);
  }
  if (kept.empty()) throw LoadError("every variable has missing values");
  for (auto c : kept) ds.variable_names.push_back(std::string(detail::trim(header[c + 1])));
  ds.values.resize(ds.times.size() * kept.size());
  for (std::size_t r = 0; r < ds.times.size(); ++r)
    for (std::size_t k = 0; k < kept.size(); ++k)
      ds.values[r * kept.size() + k] = static_cast<float>(columns[kept[k]][r]);
  return ds;
}

inline SeriesDataset load_csv(const std::string& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open " + path);
  return parse_csv(in, schema);
}

inline void write_csv(const SeriesDataset& ds, std::ostream& out) {
  out << "date";
  for (const auto& n : ds.variable_names) out << ',' << n;
  out << '\n';
  char buf[32];
  for (std::size_t r = 0; r < ds.length(); ++r) {
    const auto& t = ds.times[r];
    std::snprintf(buf, sizeof buf, "%04d-%02d-%02d %02d:%02d:%02d", t.year, t.month, t.day, t.hour,
                  t.minute, t.second);
    out << buf;
    for (std::size_t v = 0; v < ds.num_variables(); ++v) {
      const float x = ds.value(r, v);
      out << ',';
      if (std::isnan(x)) continue;  // missing cell
      std::snprintf(buf, sizeof buf, "%.9g", static_cast<double>(x));
      out << buf;
    }
    out << '\n';
  }
}

inline void write_csv(const SeriesDataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw LoadError("cannot write " + path);
  write_csv(ds, out);
}

// ---------------------------------------------------------------------------
// Splits and windows

struct IndexRange {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t size() const { return end > begin ? end - begin : 0; }
};

/// Split boundaries sit at floor(L·cumulative_ratio). Each split's row range
/// reaches back up to `lookback` rows so its first window can use earlier
/// history, while every target lies entirely inside its own split.
struct SplitPlan {
  std::size_t train_end = 0;
  std::size_t val_end = 0;
  IndexRange train, val, test;
};

inline SplitPlan chronological_split(std::size_t length, SplitRatio ratio, std::size_t lookback,
                                     std::size_t horizon) {
  ratio.validate();
  if (lookback == 0 || horizon == 0) throw ValidationError("lookback and horizon must be positive");
  if (length < lookback + horizon) {
    throw ValidationError("series of length " + std::to_string(length) +
                          " is shorter than one window (" + std::to_string(lookback + horizon) + ")");
  }
  SplitPlan p;
  p.train_end = length * static_cast<std::size_t>(ratio.train) / 10;
  p.val_end = length * static_cast<std::size_t>(ratio.train + ratio.val) / 10;
  if (length == lookback + horizon) {
    p.train = {0, length};
    p.val = {length, length};
    p.test = {length, length};
    return p;
  }
  const auto back = [lookback](std::size_t b) { return b >= lookback ? b - lookback : 0; };
  p.train = {0, p.train_end};
  p.val = {back(p.train_end), p.val_end};
  p.test = {back(p.val_end), length};
  return p;
}

struct NormStats {
  std::vector<float> mean;
  std::vector<float> stdev;
};

inline constexpr float kRevinEps = 1e-5f;

/// One (lookback, target) slice. Matrices are row-major with rows = time.
struct TimeSeriesWindow {
  std::size_t window_id = 0;
  std::size_t start_row = 0;
  std::size_t lookback_len = 0;
  std::size_t horizon = 0;
  std::size_t num_variables = 0;
  std::vector<float> lookback;  // T×N
  std::vector<float> target;    // M×N
  NormStats stats;              // per variable, over the lookback
  bool normalized = false;
  Timestamp start_time, end_time;  // first and last lookback step
  Frequency frequency = Frequency::Hour1;

  float lookback_at(std::size_t t, std::size_t v) const { return lookback[t * num_variables + v]; }
  float target_at(std::size_t t, std::size_t v) const { return target[t * num_variables + v]; }

  std::vector<float> lookback_column(std::size_t v) const {
    std::vector<float> out(lookback_len);
    for (std::size_t t = 0; t < lookback_len; ++t) out[t] = lookback_at(t, v);
    return out;
  }
};

/// Population mean and standard deviation per column; the deviation is
/// floored at eps so constant columns normalize to zero.
inline NormStats instance_stats(const std::vector<float>& rows, std::size_t t_len, std::size_t n) {
  NormStats s;
  s.mean.resize(n);
  s.stdev.resize(n);
  for (std::size_t v = 0; v < n; ++v) {
    double mu = 0.0;
    for (std::size_t t = 0; t < t_len; ++t) mu += rows[t * n + v];
    mu /= static_cast<double>(t_len);
    double var = 0.0;
    for (std::size_t t = 0; t < t_len; ++t) {
      const double d = rows[t * n + v] - mu;
      var += d * d;
    }
    var /= static_cast<double>(t_len);
    s.mean[v] = static_cast<float>(mu);
    s.stdev[v] = std::max(static_cast<float>(std::sqrt(var)), kRevinEps);
  }
  return s;
}

/// Stride-1 windows have count range_len − T − M + 1; general stride gives
/// floor((range_len − T − M)/stride) + 1. Returns empty when the range is too short.
inline std::vector<TimeSeriesWindow> make_windows(const SeriesDataset& ds, IndexRange range,
                                                  std::size_t lookback, std::size_t horizon,
                                                  std::size_t stride = 1) {
  if (stride == 0) throw ValidationError("stride must be positive");
  if (range.end > ds.length()) throw ValidationError("window range exceeds series length");
  std::vector<TimeSeriesWindow> out;
  if (range.size() < lookback + horizon) return out;
  const std::size_t n = ds.num_variables();
  std::size_t id = 0;
  for (std::size_t s = range.begin; s + lookback + horizon <= range.end; s += stride) {
    TimeSeriesWindow w;
    w.window_id = id++;
    w.start_row = s;
    w.lookback_len = lookback;
    w.horizon = horizon;
    w.num_variables = n;
    w.lookback.assign(ds.values.begin() + static_cast<std::ptrdiff_t>(s * n),
                      ds.values.begin() + static_cast<std::ptrdiff_t>((s + lookback) * n));
    w.target.assign(ds.values.begin() + static_cast<std::ptrdiff_t>((s + lookback) * n),
                    ds.values.begin() + static_cast<std::ptrdiff_t>((s + lookback + horizon) * n));
    w.stats = instance_stats(w.lookback, lookback, n);
    w.start_time = ds.times[s];
    w.end_time = ds.times[s + lookback - 1];
    w.frequency = ds.frequency;
    out.push_back(std::move(w));
  }
  return out;
}

/// Normalizes lookback and target with the lookback's statistics.
inline TimeSeriesWindow revin_normalize(const TimeSeriesWindow& w) {
  if (w.normalized) return w;
  TimeSeriesWindow out = w;
  const std::size_t n = w.num_variables;
  auto apply = [&](std::vector<float>& m, std::size_t rows) {
    for (std::size_t t = 0; t < rows; ++t)
      for (std::size_t v = 0; v < n; ++v)
        m[t * n + v] = (m[t * n + v] - w.stats.mean[v]) / w.stats.stdev[v];
  };
  apply(out.lookback, w.lookback_len);
  apply(out.target, w.horizon);
  out.normalized = true;
  return out;
}

/// Maps an M×N normalized prediction back to the window's original scale.
inline std::vector<float> revin_denormalize(const std::vector<float>& pred, std::size_t rows,
                                            const NormStats& stats) {
  const std::size_t n = stats.mean.size();
  if (pred.size() != rows * n) throw ValidationError("denormalize: prediction shape mismatch");
  std::vector<float> out(pred.size());
  for (std::size_t t = 0; t < rows; ++t)
    for (std::size_t v = 0; v < n; ++v) out[t * n + v] = pred[t * n + v] * stats.stdev[v] + stats.mean[v];
  return out;
}

/// Per-variable z-scoring fitted on the training rows, applied to the whole
/// series before windowing (benchmark convention for reported metrics).
struct StandardScaler {
  std::vector<float> mean;
  std::vector<float> stdev;

  static StandardScaler fit(const SeriesDataset& ds, std::size_t rows) {
    if (rows == 0 || rows > ds.length()) throw ValidationError("scaler: invalid fit range");
    std::vector<float> head(ds.values.begin(),
                            ds.values.begin() + static_cast<std::ptrdiff_t>(rows * ds.num_variables()));
    auto s = instance_stats(head, rows, ds.num_variables());
    return {std::move(s.mean), std::move(s.stdev)};
  }

  void apply(SeriesDataset& ds) const {
    const std::size_t n = ds.num_variables();
    if (mean.size() != n) throw ValidationError("scaler: variable count mismatch");
    for (std::size_t r = 0; r < ds.length(); ++r)
      for (std::size_t v = 0; v < n; ++v) ds.value(r, v) = (ds.value(r, v) - mean[v]) / stdev[v];
  }
};

}  // namespace timecma
