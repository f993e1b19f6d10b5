/* Copyright 2026 The GatedAttention Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "gatedattn/instrumentation.hpp"

namespace gatedattn {
namespace {

// Independent evaluation of the counting convention, term by term.
std::uint64_t flops_oracle(std::uint64_t scored, std::uint64_t d, std::uint64_t hs) {
  const std::uint64_t per_position = (d * hs) * 2  // W h, one multiply-add each
                                     + hs          // bias add
                                     + hs          // tanh
                                     + hs * 2      // v . u
                                     + 1;          // exp
  return scored * per_position + 2 * scored + 2 * scored * d;
}

TEST(Flops, MatchesTermByTermOracle) {
  const FlopsReport r = count_attention_flops(7, 20, 64, 32);
  EXPECT_EQ(r.attention_flops, flops_oracle(7, 64, 32));
  EXPECT_EQ(r.breakdown.total(), r.attention_flops);
  EXPECT_EQ(r.breakdown.weighted_sum, 2u * 7 * 64);
  EXPECT_EQ(r.breakdown.exp, 7u);
  EXPECT_EQ(r.positions_scored, 7u);
  EXPECT_EQ(r.positions_total, 20u);
}

TEST(Flops, NoOpenPositionCountsFallbackOnly) {
  EXPECT_EQ(count_attention_flops(0, 12, 16, 8).attention_flops, flops_oracle(1, 16, 8));
  EXPECT_EQ(count_attention_flops(0, 0, 16, 8).attention_flops, 0u);
}

TEST(Flops, MonotoneInScoredPositions) {
  std::uint64_t prev = 0;
  for (std::size_t t = 1; t <= 30; ++t) {
    const auto f = count_attention_flops(t, 30, 200, 100).attention_flops;
    EXPECT_GT(f, prev);
    prev = f;
  }
}

TEST(Flops, GatedOverDenseRatioTracksScoredFraction) {
  for (std::size_t h : {50, 100}) {
    const auto dense = count_attention_flops(40, 40, 2 * h, h).attention_flops;
    for (std::size_t scored : {1, 5, 13, 20, 39}) {
      const double ratio = static_cast<double>(count_attention_flops(scored, 40, 2 * h, h).attention_flops) /
                           static_cast<double>(dense);
      const double expected = scored / 40.0;
      EXPECT_NEAR(ratio / expected, 1.0, 0.1);
    }
  }
}

TEST(Flops, ReportsAccumulate) {
  FlopsReport sum;
  sum += count_attention_flops(3, 5, 4, 2);
  sum += count_attention_flops(2, 6, 4, 2);
  EXPECT_EQ(sum.attention_flops, flops_oracle(3, 4, 2) + flops_oracle(2, 4, 2));
  EXPECT_EQ(sum.positions_scored, 5u);
  EXPECT_EQ(sum.positions_total, 11u);
}

TEST(Density, AllOpenAndHalfOpen) {
  const std::vector<std::size_t> lengths = {4, 2};
  const std::vector<std::uint8_t> all = {1, 1, 1, 1, 1, 1, 0, 0};
  EXPECT_DOUBLE_EQ(density(all, lengths, 4), 1.0);
  const std::vector<std::uint8_t> half = {1, 0, 1, 0, 0, 1, 1, 1};
  EXPECT_DOUBLE_EQ(density(half, lengths, 4), 0.5);
}

TEST(Density, IgnoresPaddedPositions) {
  const std::vector<std::size_t> lengths = {1};
  const std::vector<std::uint8_t> gates = {0, 1, 1};
  EXPECT_DOUBLE_EQ(density(gates, lengths, 3), 0.0);
}

TEST(GatePrecisionRecall, Conventions) {
  const std::vector<std::size_t> gold = {1, 3};
  const std::vector<std::uint8_t> exact = {0, 1, 0, 1, 0};
  auto pr = gate_precision_recall(exact, gold);
  EXPECT_DOUBLE_EQ(pr.precision, 1.0);
  EXPECT_DOUBLE_EQ(pr.recall, 1.0);

  const std::vector<std::uint8_t> all = {1, 1, 1, 1, 1};
  pr = gate_precision_recall(all, gold);
  EXPECT_DOUBLE_EQ(pr.precision, 2.0 / 5.0);
  EXPECT_DOUBLE_EQ(pr.recall, 1.0);

  const std::vector<std::uint8_t> none(5, 0);
  pr = gate_precision_recall(none, gold);
  EXPECT_EQ(pr.precision, 0.0);
  EXPECT_EQ(pr.recall, 0.0);
}

TEST(GatePrecisionRecall, CountsPoolAcrossExamples) {
  GateCounts c;
  const std::vector<std::uint8_t> g1 = {1, 0, 0};
  const std::vector<std::uint8_t> g2 = {1, 1, 0};
  const std::vector<std::size_t> gold1 = {0};
  const std::vector<std::size_t> gold2 = {2};
  c += count_gate_hits(g1, gold1);
  c += count_gate_hits(g2, gold2);
  EXPECT_EQ(c.open, 3u);
  EXPECT_EQ(c.gold, 2u);
  EXPECT_EQ(c.open_gold, 1u);
  EXPECT_DOUBLE_EQ(c.precision(), 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(c.recall(), 0.5);
}

AttentionRecord sample_record() {
  AttentionRecord r;
  r.tokens = {"what", "\"city\"", "<b>", "?"};
  r.gates = {0, 1, 1, 0};
  r.alpha = {0.0, 0.1 + 0.2, 1.0 - (0.1 + 0.2), 0.0};
  r.p = {0.01, 0.93, 0.7, 1e-17};
  r.predicted = "LOC";
  r.gold = "LOC";
  return r;
}

class ExportTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = std::filesystem::temp_directory_path() /
           ("gatedattn_export_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    std::filesystem::create_directories(dir_);
  }
  void TearDown() override { std::filesystem::remove_all(dir_); }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }
  static std::string slurp(const std::string& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  std::filesystem::path dir_;
};

TEST_F(ExportTest, JsonLinesRoundTripIsExact) {
  AttentionRecord other = sample_record();
  other.tokens = {"x"};
  other.gates = {1};
  other.alpha = {1.0};
  other.p = {0.4};
  other.gold = "";
  const std::vector<AttentionRecord> records = {sample_record(), other};
  export_attention(records, path("a.jsonl"), ExportFormat::json_lines);
  EXPECT_EQ(read_json_lines(path("a.jsonl")), records);
}

TEST_F(ExportTest, ExportedAlphaSumsToOne) {
  export_attention({sample_record()}, path("a.jsonl"), ExportFormat::json_lines);
  for (const auto& r : read_json_lines(path("a.jsonl"))) {
    double s = 0.0;
    for (double a : r.alpha) s += a;
    EXPECT_NEAR(s, 1.0, 1e-9);
  }
}

TEST_F(ExportTest, EmptyRecordList) {
  export_attention({}, path("e.jsonl"), ExportFormat::json_lines);
  EXPECT_TRUE(slurp(path("e.jsonl")).empty());
  export_attention({}, path("e.html"), ExportFormat::html_heatmap);
  const std::string html = slurp(path("e.html"));
  EXPECT_NE(html.find("<html>"), std::string::npos);
  EXPECT_NE(html.find("</html>"), std::string::npos);
  EXPECT_EQ(html.find("<span"), std::string::npos);
}

TEST_F(ExportTest, HeatmapHasOneSpanPerTokenAndEscapes) {
  const std::string html = render_heatmap({sample_record(), sample_record()});
  std::size_t spans = 0;
  for (auto pos = html.find("<span"); pos != std::string::npos; pos = html.find("<span", pos + 1)) ++spans;
  EXPECT_EQ(spans, 8u);
  EXPECT_NE(html.find("&lt;b&gt;"), std::string::npos);
  EXPECT_EQ(html.find("<b>"), std::string::npos);
  EXPECT_NE(html.find("tok closed"), std::string::npos);
}

TEST_F(ExportTest, UnwritablePathThrows) {
  EXPECT_THROW(export_attention({}, path("missing/dir/x.jsonl"), ExportFormat::json_lines), std::runtime_error);
}

TEST(ExportFormatName, ParsesKnownNames) {
  EXPECT_EQ(parse_export_format("json_lines"), ExportFormat::json_lines);
  EXPECT_EQ(parse_export_format("html_heatmap"), ExportFormat::html_heatmap);
  EXPECT_ANY_THROW(parse_export_format("pdf"));
}

}  // namespace
}  // namespace gatedattn
