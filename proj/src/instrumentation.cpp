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

#include "gatedattn/instrumentation.hpp"

#include <algorithm>
#include <fstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "gatedattn/errors.hpp"

namespace gatedattn {

FlopsReport& FlopsReport::operator+=(const FlopsReport& other) {
  attention_flops += other.attention_flops;
  breakdown.score_mlp += other.breakdown.score_mlp;
  breakdown.exp += other.breakdown.exp;
  breakdown.normalize += other.breakdown.normalize;
  breakdown.weighted_sum += other.breakdown.weighted_sum;
  positions_scored += other.positions_scored;
  positions_total += other.positions_total;
  return *this;
}

FlopsReport count_attention_flops(std::size_t t_scored, std::size_t t_total,
                                  std::size_t states_dim, std::size_t scorer_hidden) {
  if (t_scored > t_total) throw ContractError("count_attention_flops: t_scored > t_total");
  FlopsReport r;
  r.positions_total = t_total;
  if (t_total == 0) return r;
  const std::uint64_t n = std::max<std::size_t>(t_scored, 1);
  const std::uint64_t d = states_dim;
  const std::uint64_t h = scorer_hidden;
  r.positions_scored = n;
  r.breakdown.score_mlp = n * (2 * d * h + h + h + 2 * h);
  r.breakdown.exp = n;
  r.breakdown.normalize = 2 * n;
  r.breakdown.weighted_sum = 2 * n * d;
  r.attention_flops = r.breakdown.total();
  return r;
}

double density(std::span<const std::uint8_t> gates, std::span<const std::size_t> lengths,
               std::size_t max_len) {
  std::size_t open = 0, total = 0;
  for (std::size_t b = 0; b < lengths.size(); ++b) {
    for (std::size_t t = 0; t < lengths[b]; ++t) open += gates[b * max_len + t] != 0;
    total += lengths[b];
  }
  return total == 0 ? 0.0 : static_cast<double>(open) / static_cast<double>(total);
}

GateCounts& GateCounts::operator+=(const GateCounts& other) {
  open += other.open;
  gold += other.gold;
  open_gold += other.open_gold;
  return *this;
}

double GateCounts::precision() const {
  return open == 0 ? 0.0 : static_cast<double>(open_gold) / static_cast<double>(open);
}

double GateCounts::recall() const {
  return open == 0 || gold == 0 ? 0.0 : static_cast<double>(open_gold) / static_cast<double>(gold);
}

GateCounts count_gate_hits(std::span<const std::uint8_t> gates,
                           std::span<const std::size_t> gold_positions) {
  GateCounts c;
  for (auto g : gates) c.open += g != 0;
  for (std::size_t pos : gold_positions) {
    if (pos >= gates.size()) continue;  // truncated away
    ++c.gold;
    c.open_gold += gates[pos] != 0;
  }
  return c;
}

PrecisionRecall gate_precision_recall(std::span<const std::uint8_t> gates,
                                      std::span<const std::size_t> gold_positions) {
  const GateCounts c = count_gate_hits(gates, gold_positions);
  return {c.precision(), c.recall()};
}

ExportFormat parse_export_format(const std::string& name) {
  if (name == "json_lines") return ExportFormat::json_lines;
  if (name == "html_heatmap") return ExportFormat::html_heatmap;
  throw ConfigError("unknown export format '" + name + "'");
}

std::string to_json_line(const AttentionRecord& r) {
  nlohmann::ordered_json j;
  j["tokens"] = r.tokens;
  j["gates"] = r.gates;
  j["alpha"] = r.alpha;
  j["p"] = r.p;
  j["predicted"] = r.predicted;
  j["gold"] = r.gold;
  return j.dump();
}

AttentionRecord parse_json_line(const std::string& line) {
  try {
    const auto j = nlohmann::json::parse(line);
    AttentionRecord r;
    j.at("tokens").get_to(r.tokens);
    j.at("gates").get_to(r.gates);
    j.at("alpha").get_to(r.alpha);
    j.at("p").get_to(r.p);
    j.at("predicted").get_to(r.predicted);
    j.at("gold").get_to(r.gold);
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("attention record: ") + e.what());
  }
}

std::vector<AttentionRecord> read_json_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::vector<AttentionRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      out.push_back(parse_json_line(line));
    } catch (const ParseError& e) {
      throw ParseError(e.what(), lineno);
    }
  }
  return out;
}

namespace {

std::string html_escape(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

std::string render_heatmap(const std::vector<AttentionRecord>& records) {
  std::string html =
      "<!DOCTYPE html>\n<html>\n<head>\n<meta charset=\"utf-8\">\n"
      "<title>Attention heatmap</title>\n<style>\n"
      "body { font-family: sans-serif; }\n"
      ".record { margin: 0.8em 0; line-height: 1.9; }\n"
      ".tok { padding: 0.1em 0.2em; }\n"
      ".closed { text-decoration: line-through; color: #888; }\n"
      ".meta { font-size: 0.8em; color: #555; }\n"
      "</style>\n</head>\n<body>\n";
  for (std::size_t i = 0; i < records.size(); ++i) {
    const AttentionRecord& r = records[i];
    double peak = 0.0;
    for (double a : r.alpha) peak = std::max(peak, a);
    html += fmt::format("<div class=\"record\"><div class=\"meta\">#{} predicted={} gold={}</div>\n",
                        i, html_escape(r.predicted), html_escape(r.gold));
    for (std::size_t t = 0; t < r.tokens.size(); ++t) {
      const double alpha = t < r.alpha.size() ? r.alpha[t] : 0.0;
      const bool open = t < r.gates.size() && r.gates[t] != 0;
      const double opacity = peak > 0.0 ? alpha / peak : 0.0;
      html += fmt::format(
          "<span class=\"tok{}\" style=\"background-color: rgba(220, 40, 40, {:.4f})\" "
          "title=\"alpha={:.6f}\">{}</span>\n",
          open ? "" : " closed", opacity, alpha, html_escape(r.tokens[t]));
    }
    html += "</div>\n";
  }
  html += "</body>\n</html>\n";
  return html;
}

void export_attention(const std::vector<AttentionRecord>& records, const std::string& path,
                      ExportFormat format) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  if (format == ExportFormat::json_lines) {
    for (const auto& r : records) out << to_json_line(r) << '\n';
  } else {
    out << render_heatmap(records);
  }
  if (!out) throw std::runtime_error("write failed for " + path);
}

}  // namespace gatedattn
