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


#include <gtest/gtest.h>

#include <regex>
#include <set>

#include "test_util.hpp"
#include "timecma/prompt.hpp"
#include "timecma/synthetic.hpp"

namespace timecma {
namespace {

TimeSeriesWindow toy_window(std::vector<float> lookback, std::size_t n = 1) {
  TimeSeriesWindow w;
  w.num_variables = n;
  w.lookback_len = lookback.size() / n;
  w.horizon = 1;
  w.lookback = std::move(lookback);
  w.target.assign(n, 0.0f);
  w.stats = instance_stats(w.lookback, w.lookback_len, n);
  w.start_time = Timestamp{2020, 1, 6};
  w.end_time = advance(w.start_time, Frequency::Week1, static_cast<std::int64_t>(w.lookback_len) - 1);
  w.frequency = Frequency::Week1;
  return w;
}

TEST(Trend, Examples) {
  EXPECT_DOUBLE_EQ(trend(std::vector<double>{1, 2, 4}), 3.0);
  EXPECT_DOUBLE_EQ(trend(std::vector<double>{5, 5, 5, 5}), 0.0);
  EXPECT_DOUBLE_EQ(trend(std::vector<double>{4, 1}), -3.0);
}

TEST(Trend, RejectsShortSeries) {
  EXPECT_THROW(trend(std::vector<double>{}), ValidationError);
  EXPECT_THROW(trend(std::vector<double>{1.0}), ValidationError);
}

// Telescoping: Σ(x[t+1]-x[t]) = x[T-1]-x[0].
TEST(Trend, TelescopesOnRandomSeries) {
  Rng rng(17);
  for (int i = 0; i < 1000; ++i) {
    const std::size_t len = 2 + rng.next_u64() % 200;
    std::vector<double> x(len);
    for (auto& v : x) v = rng.uniform(-1000.0f, 1000.0f);
    EXPECT_NEAR(trend(x), x.back() - x.front(), 1e-9 * 1000.0 * static_cast<double>(len));
  }
}

TEST(FormatValue, FixedPointWithoutNegativeZero) {
  EXPECT_EQ(format_value(2.0, {}), "2.00");
  EXPECT_EQ(format_value(-1.005, {3}), "-1.005");
  EXPECT_EQ(format_value(-0.001, {}), "0.00");
  EXPECT_EQ(format_value(1.23456, {4}), "1.2346");
}

TEST(Render, P5ToyExample) {
  // [1,3] normalizes to [-1,1]; trend is 2.
  const auto rec = render(toy_window({1.0f, 3.0f}), 0, PromptDesign::P5);
  EXPECT_DOUBLE_EQ(rec.trend_value, 2.0);
  EXPECT_EQ(rec.value_count, 2u);
  EXPECT_NE(rec.text.find("the values were -1.00, 1.00 every week"), std::string::npos) << rec.text;
  const std::string suffix = "The total trend value is 2.00";
  ASSERT_GE(rec.text.size(), suffix.size());
  EXPECT_EQ(rec.text.substr(rec.text.size() - suffix.size()), suffix);
  EXPECT_EQ(last_token(rec.text), "2.00");
}

TEST(Render, ConstantSeriesHasZeroTrend) {
  const auto rec = render(toy_window({7, 7, 7, 7}), 0, PromptDesign::P5);
  EXPECT_DOUBLE_EQ(rec.trend_value, 0.0);
  EXPECT_EQ(last_token(rec.text), "0.00");
}

TEST(Render, Deterministic) {
  auto ds = synthetic::ili();
  auto ws = make_windows(ds, {0, 200}, 36, 24);
  for (int d = 1; d <= 5; ++d) {
    const auto design = static_cast<PromptDesign>(d);
    const auto a = render_all(ws, design);
    const auto b = render_all(ws, design);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].text, b[i].text);
  }
}

TEST(Render, NumeralLastTokenForSummaryDesigns) {
  auto ds = synthetic::ili();
  auto ws = make_windows(ds, {0, 300}, 36, 24, 7);
  for (auto d : {PromptDesign::P3, PromptDesign::P4, PromptDesign::P5}) {
    ASSERT_TRUE(ends_with_numeral(d));
    for (const auto& rec : render_all(ws, d)) {
      EXPECT_TRUE(last_token_is_numeral(rec.text)) << rec.text;
    }
  }
  EXPECT_FALSE(ends_with_numeral(PromptDesign::P1));
  EXPECT_FALSE(last_token_is_numeral(render(ws[0], 0, PromptDesign::P1).text));
}

TEST(Render, P5TrendTokenMatchesTrendValue) {
  auto ds = synthetic::ett_hourly(1, 800);
  auto ws = make_windows(ds, {0, 800}, 96, 24, 50);
  const std::regex num(R"(^-?\d+\.\d{2}$)");
  for (const auto& rec : render_all(ws, PromptDesign::P5)) {
    const auto tok = last_token(rec.text);
    ASSERT_TRUE(std::regex_match(tok, num)) << tok;
    EXPECT_NEAR(std::stod(tok), rec.trend_value, 0.005 + 1e-9);
  }
}

TEST(Render, ValuesAreNormalizedLookback) {
  auto w = toy_window({10, 20, 30, 40});
  const auto rec = render(w, 0, PromptDesign::P1);
  EXPECT_NEAR(rec.mean, 0.0, 1e-6);
  EXPECT_NEAR(rec.stdev, 1.0, 1e-5);
  EXPECT_NEAR(rec.last_value, 30.0 / std::sqrt(500.0), 1e-5);
  EXPECT_EQ(rec.text, "From 2020-01-06 to 2020-01-27, the values were -1.34, -0.45, 0.45, 1.34 every week.");
}

TEST(Render, VariableOutOfRange) {
  EXPECT_THROW(render(toy_window({1, 2}), 1, PromptDesign::P5), ValidationError);
}

TEST(RenderAll, WindowMajorOrder) {
  auto ds = synthetic::ili();
  auto ws = make_windows(ds, {0, 65}, 36, 24);
  ASSERT_EQ(ws.size(), 6u);
  const auto recs = render_all(ws, PromptDesign::P5);
  ASSERT_EQ(recs.size(), 42u);
  for (std::size_t i = 0; i < recs.size(); ++i) {
    EXPECT_EQ(recs[i].window_id, i / 7);
    EXPECT_EQ(recs[i].variable_id, i % 7);
    EXPECT_EQ(recs[i].text, render(ws[i / 7], i % 7, PromptDesign::P5).text);
  }
}

TEST(RenderAll, EmptyInputEmptyStream) {
  EXPECT_TRUE(render_all({}, PromptDesign::P5).empty());
}

TEST(Templates, HashStableAndDesignParse) {
  EXPECT_EQ(template_hash(), template_hash());
  EXPECT_EQ(template_hash().size(), 16u);
  std::set<std::string_view> distinct(kPromptTemplates.begin(), kPromptTemplates.end());
  EXPECT_EQ(distinct.size(), 5u);
  EXPECT_EQ(parse_prompt_design("P3"), PromptDesign::P3);
  EXPECT_EQ(parse_prompt_design("p5"), PromptDesign::P5);
  EXPECT_THROW(parse_prompt_design("P6"), ValidationError);
  EXPECT_THROW(parse_prompt_design("five"), ValidationError);
  EXPECT_EQ(prompt_design_name(PromptDesign::P2), "P2");
}

TEST(LastToken, NumeralRecognition) {
  EXPECT_TRUE(last_token_is_numeral("trend is -2.50"));
  EXPECT_TRUE(last_token_is_numeral("from 2016-07-01 to 2016-07-02 13:00"));
  EXPECT_FALSE(last_token_is_numeral("every hour."));
  EXPECT_FALSE(last_token_is_numeral(""));
}

}  // namespace
}  // namespace timecma
