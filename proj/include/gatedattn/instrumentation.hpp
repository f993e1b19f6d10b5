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

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "gatedattn/stochastic.hpp"

namespace gatedattn {

// Attention cost counted as: multiply-add = 2 flops, add/multiply/tanh/exp = 1.
struct FlopsBreakdown {
  std::uint64_t score_mlp = 0;
  std::uint64_t exp = 0;
  std::uint64_t normalize = 0;
  std::uint64_t weighted_sum = 0;

  std::uint64_t total() const { return score_mlp + exp + normalize + weighted_sum; }
};

struct FlopsReport {
  std::uint64_t attention_flops = 0;
  FlopsBreakdown breakdown;
  std::uint64_t positions_scored = 0;
  std::uint64_t positions_total = 0;

  FlopsReport& operator+=(const FlopsReport& other);
};

// One example. states_dim is the width of the attended states (2H for the
// BiLSTM), scorer_hidden the scorer width. A non-empty example always scores
// at least one position.
//   per scored position: 2*D*Hs + Hs + Hs + 2*Hs (projection, bias, tanh,
//   dot with v) and 1 (exp)
//   normalisation: 2 * T_scored; weighted sum: 2 * T_scored * D
FlopsReport count_attention_flops(std::size_t t_scored, std::size_t t_total,
                                  std::size_t states_dim, std::size_t scorer_hidden);

// Open gates over valid positions / total valid length. gates is [B x T].
double density(std::span<const std::uint8_t> gates, std::span<const std::size_t> lengths,
               std::size_t max_len);

struct GateCounts {
  std::size_t open = 0;
  std::size_t gold = 0;
  std::size_t open_gold = 0;

  GateCounts& operator+=(const GateCounts& other);
  // (0, 0) conventions when nothing is open / no gold exists.
  double precision() const;
  double recall() const;
};

struct PrecisionRecall {
  double precision = 0.0;
  double recall = 0.0;
};

// gates: one example's gates over its valid positions.
GateCounts count_gate_hits(std::span<const std::uint8_t> gates,
                           std::span<const std::size_t> gold_positions);

PrecisionRecall gate_precision_recall(std::span<const std::uint8_t> gates,
                                      std::span<const std::size_t> gold_positions);

struct AttentionRecord {
  std::vector<std::string> tokens;
  std::vector<int> gates;
  std::vector<double> alpha;
  std::vector<double> p;
  std::string predicted;
  std::string gold;

  bool operator==(const AttentionRecord&) const = default;
};

enum class ExportFormat { json_lines, html_heatmap };

ExportFormat parse_export_format(const std::string& name);

// Throws std::runtime_error if the path cannot be written.
void export_attention(const std::vector<AttentionRecord>& records, const std::string& path,
                      ExportFormat format);

std::string to_json_line(const AttentionRecord& record);
AttentionRecord parse_json_line(const std::string& line);
std::vector<AttentionRecord> read_json_lines(const std::string& path);

std::string render_heatmap(const std::vector<AttentionRecord>& records);

}  // namespace gatedattn
