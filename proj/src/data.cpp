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

#include "gatedattn/data.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "gatedattn/errors.hpp"
#include "gatedattn/stochastic.hpp"

namespace gatedattn {

namespace {

constexpr double kMissingRowStddev = 0.1;
constexpr char kBreakMarker = '\x1f';

bool is_word_char(unsigned char c) { return std::isalnum(c) || c >= 0x80; }

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  return in;
}

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  return out;
}

void strip_cr(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

void split_chunk(const std::string& chunk, std::vector<std::string>& out) {
  std::string word;
  auto flush = [&] {
    if (!word.empty()) out.push_back(std::move(word));
    word.clear();
  };
  for (std::size_t i = 0; i < chunk.size(); ++i) {
    const auto c = static_cast<unsigned char>(chunk[i]);
    const bool next_is_word = i + 1 < chunk.size() &&
                              is_word_char(static_cast<unsigned char>(chunk[i + 1]));
    if (is_word_char(c)) {
      word.push_back(static_cast<char>(std::tolower(c)));
    } else if ((c == '\'' || c == '-') && !word.empty() && next_is_word) {
      word.push_back(static_cast<char>(c));  // don't, well-known
    } else if (c == '\'' && word.empty() && next_is_word) {
      word.push_back('\'');  // 's, 're
    } else {
      flush();
      out.emplace_back(1, static_cast<char>(c));
    }
  }
  flush();
}

}  // namespace

std::vector<std::string> tokenize(const std::string& text) {
  // line breaks scraped from HTML survive as a single token
  std::string marked = text;
  for (const char* br : {"<br />", "<br/>", "<br>"}) {
    const std::string pattern(br);
    for (std::size_t at = marked.find(pattern); at != std::string::npos;
         at = marked.find(pattern, at + 3)) {
      marked.replace(at, pattern.size(), std::string(" ") + kBreakMarker + " ");
    }
  }
  std::vector<std::string> out;
  std::istringstream in(marked);
  std::string chunk;
  while (in >> chunk) {
    if (chunk.size() == 1 && chunk[0] == kBreakMarker) {
      out.emplace_back("<br />");
    } else {
      split_chunk(chunk, out);
    }
  }
  return out;
}

Vocab::Vocab() {
  add(kPadToken);
  add(kUnkToken);
}

void Vocab::add(const std::string& token) {
  if (ids_.count(token)) return;
  ids_.emplace(token, tokens_.size());
  tokens_.push_back(token);
}

Vocab Vocab::build(const std::vector<TextExample>& examples, std::size_t min_freq) {
  std::map<std::string, std::size_t> counts;
  for (const auto& ex : examples) {
    for (const auto& tok : ex.tokens) ++counts[tok];
  }
  std::vector<std::pair<std::string, std::size_t>> kept;
  for (const auto& [tok, n] : counts) {
    if (n >= min_freq && tok != kPadToken && tok != kUnkToken) kept.emplace_back(tok, n);
  }
  std::stable_sort(kept.begin(), kept.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  Vocab vocab;
  for (const auto& entry : kept) vocab.add(entry.first);
  return vocab;
}

std::size_t Vocab::id(const std::string& token) const {
  const auto it = ids_.find(token);
  return it == ids_.end() ? kUnkId : it->second;
}

void Vocab::save(const std::string& path) const {
  auto out = open_output(path);
  for (std::size_t i = 0; i < tokens_.size(); ++i) out << tokens_[i] << '\t' << i << '\n';
}

Vocab Vocab::load(const std::string& path) {
  auto in = open_input(path);
  Vocab vocab;
  vocab.tokens_.clear();
  vocab.ids_.clear();
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    strip_cr(line);
    const std::size_t tab = line.rfind('\t');
    if (tab == std::string::npos) throw ParseError("vocab: expected token<TAB>id", lineno);
    std::size_t id = 0;
    const char* first = line.data() + tab + 1;
    const char* last = line.data() + line.size();
    const auto [ptr, ec] = std::from_chars(first, last, id);
    if (ec != std::errc() || ptr != last || id != vocab.tokens_.size()) {
      throw ParseError("vocab: ids must be dense and in order", lineno);
    }
    vocab.add(line.substr(0, tab));
  }
  if (vocab.size() < 2 || vocab.tokens_[kPadId] != kPadToken || vocab.tokens_[kUnkId] != kUnkToken) {
    throw ParseError("vocab: " + path + " does not start with the reserved tokens");
  }
  return vocab;
}

LabelMap LabelMap::fit(const std::vector<TextExample>& examples) {
  LabelMap map;
  for (const auto& ex : examples) {
    if (map.ids_.count(ex.label)) continue;
    map.ids_.emplace(ex.label, static_cast<int>(map.names_.size()));
    map.names_.push_back(ex.label);
  }
  return map;
}

int LabelMap::id(const std::string& label) const {
  const auto it = ids_.find(label);
  if (it == ids_.end()) throw ParseError("unknown label '" + label + "'");
  return it->second;
}

void LabelMap::save(const std::string& path) const {
  auto out = open_output(path);
  for (std::size_t i = 0; i < names_.size(); ++i) out << names_[i] << '\t' << i << '\n';
}

LabelMap LabelMap::load(const std::string& path) {
  auto in = open_input(path);
  LabelMap map;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    strip_cr(line);
    const std::size_t tab = line.rfind('\t');
    if (tab == std::string::npos) throw ParseError("labels: expected label<TAB>id", lineno);
    const std::string name = line.substr(0, tab);
    if (line.substr(tab + 1) != std::to_string(map.names_.size()) || map.ids_.count(name)) {
      throw ParseError("labels: ids must be dense and in order", lineno);
    }
    map.ids_.emplace(name, static_cast<int>(map.names_.size()));
    map.names_.push_back(name);
  }
  return map;
}

std::vector<EncodedExample> encode(const std::vector<TextExample>& examples, const Vocab& vocab,
                                   const LabelMap& labels) {
  std::vector<EncodedExample> out;
  out.reserve(examples.size());
  for (const auto& ex : examples) {
    EncodedExample e;
    e.ids.reserve(ex.tokens.size());
    for (const auto& tok : ex.tokens) e.ids.push_back(vocab.id(tok));
    e.label = labels.id(ex.label);
    e.gold = ex.gold;
    out.push_back(std::move(e));
  }
  return out;
}

EmbeddingTable random_embeddings(const Vocab& vocab, std::size_t dim, std::uint64_t seed) {
  if (dim == 0) throw ContractError("random_embeddings: dimension must be positive");
  EmbeddingTable table;
  table.matrix = Tensor(Shape{vocab.size(), dim});
  auto m = table.matrix.mutable_data();
  for (std::size_t row = 1; row < vocab.size(); ++row) {
    // one stream per row so a row's values do not depend on which others are in the file
    Rng rng = Rng(seed).derive(row);
    for (std::size_t j = 0; j < dim; ++j) m[row * dim + j] = rng.normal(0.0, kMissingRowStddev);
  }
  return table;
}

EmbeddingTable load_embeddings(const std::string& path, const Vocab& vocab, std::uint64_t seed,
                               std::optional<std::size_t> expected_dim) {
  auto in = open_input(path);
  std::string line;
  std::size_t lineno = 0;
  std::size_t dim = 0;
  std::vector<std::pair<std::size_t, std::vector<double>>> rows;
  std::vector<std::uint8_t> seen(vocab.size(), 0);
  std::vector<double> values;
  while (std::getline(in, line)) {
    ++lineno;
    strip_cr(line);
    if (line.empty()) continue;
    const std::size_t space = line.find(' ');
    if (space == std::string::npos || space == 0) {
      throw ParseError("embeddings: expected 'word v1 ... vE'", lineno);
    }
    values.clear();
    const char* p = line.data() + space;
    const char* end = line.data() + line.size();
    while (p < end) {
      while (p < end && *p == ' ') ++p;
      if (p == end) break;
      double v = 0.0;
      const auto [next, ec] = std::from_chars(p, end, v);
      if (ec != std::errc() || (next != end && *next != ' ')) {
        throw ParseError("embeddings: unreadable number", lineno);
      }
      values.push_back(v);
      p = next;
    }
    if (dim == 0) {
      dim = values.size();
      if (dim == 0) throw ParseError("embeddings: no values", lineno);
      if (expected_dim && *expected_dim != dim) {
        throw ParseError("embeddings: file has dimension " + std::to_string(dim) +
                             ", expected " + std::to_string(*expected_dim),
                         lineno);
      }
    } else if (values.size() != dim) {
      throw ParseError("embeddings: expected " + std::to_string(dim) + " values, found " +
                           std::to_string(values.size()),
                       lineno);
    }
    const std::string word = line.substr(0, space);
    if (!vocab.contains(word)) continue;
    const std::size_t id = vocab.id(word);
    if (id == kPadId || id == kUnkId || seen[id]) continue;
    seen[id] = 1;
    rows.emplace_back(id, values);
  }
  if (dim == 0) throw ParseError("embeddings: " + path + " is empty");

  EmbeddingTable table = random_embeddings(vocab, dim, seed);
  auto m = table.matrix.mutable_data();
  for (const auto& [id, vals] : rows) std::copy(vals.begin(), vals.end(), m.begin() + id * dim);
  table.found = rows.size();
  const std::size_t real = vocab.size() > 2 ? vocab.size() - 2 : 0;
  table.coverage = real == 0 ? 0.0 : static_cast<double>(table.found) / static_cast<double>(real);
  return table;
}

DatasetFormat parse_dataset_format(const std::string& name) {
  if (name == "tsv_label_text" || name == "tsv") return DatasetFormat::tsv_label_text;
  if (name == "trec_native" || name == "trec") return DatasetFormat::trec_native;
  throw ConfigError("unknown dataset format '" + name + "'");
}

std::vector<TextExample> read_dataset(const std::string& path, DatasetFormat format) {
  auto in = open_input(path);
  std::vector<TextExample> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    strip_cr(line);
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    TextExample ex;
    if (format == DatasetFormat::tsv_label_text) {
      const std::size_t tab = line.find('\t');
      if (tab == std::string::npos || tab == 0) throw ParseError("expected label<TAB>text", lineno);
      ex.label = line.substr(0, tab);
      ex.tokens = tokenize(line.substr(tab + 1));
    } else {
      const std::size_t colon = line.find(':');
      const std::size_t space = line.find(' ');
      if (colon == std::string::npos || colon == 0 || (space != std::string::npos && colon > space)) {
        throw ParseError("expected COARSE:fine text", lineno);
      }
      ex.label = line.substr(0, colon);
      ex.tokens = space == std::string::npos ? std::vector<std::string>{}
                                             : tokenize(line.substr(space + 1));
    }
    out.push_back(std::move(ex));
  }
  return out;
}

namespace {

struct SynthStructure {
  std::vector<std::string> keywords;
  std::vector<std::string> noise;
};

SynthStructure synth_structure(const SynthOptions& o, std::uint64_t structure_seed) {
  if (o.seq_len < 3) throw ContractError("synth_keyword_task: seq_len must be at least 3");
  if (o.n_keywords == 0 || o.n_keywords > o.n_classes) {
    throw ContractError("synth_keyword_task: need 1 <= n_keywords <= n_classes");
  }
  if (o.vocab_size < o.n_keywords + 3) {
    throw ContractError("synth_keyword_task: vocabulary too small for the keywords");
  }
  const std::size_t words = o.vocab_size - 2;
  std::vector<std::size_t> order(words);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(mix_seed(structure_seed, 0x5EED));
  for (std::size_t i = words - 1; i > 0; --i) std::swap(order[i], order[rng.below(i + 1)]);
  SynthStructure s;
  for (std::size_t i = 0; i < words; ++i) {
    const std::string tok = "w" + std::to_string(order[i]);
    (i < o.n_keywords ? s.keywords : s.noise).push_back(tok);
  }
  return s;
}

}  // namespace

std::vector<std::string> synth_keywords(const SynthOptions& options,
                                        std::uint64_t structure_seed) {
  return synth_structure(options, structure_seed).keywords;
}

std::vector<TextExample> synth_keyword_task(const SynthOptions& options,
                                            std::uint64_t structure_seed) {
  const SynthStructure s = synth_structure(options, structure_seed);
  Rng rng(options.seed);
  std::vector<TextExample> out(options.n_examples);
  for (auto& ex : out) {
    ex.tokens.reserve(options.seq_len);
    for (std::size_t t = 0; t < options.seq_len; ++t) {
      ex.tokens.push_back(s.noise[rng.below(s.noise.size())]);
    }
    const std::size_t k = rng.below(s.keywords.size());
    const std::size_t pos = rng.below(options.seq_len);
    ex.tokens[pos] = s.keywords[k];
    ex.gold = {pos};
    ex.label = "c" + std::to_string(k % options.n_classes);
  }
  return out;
}

std::vector<SequenceBatch> make_batches(const std::vector<EncodedExample>& examples,
                                        std::size_t batch_size, std::size_t max_len,
                                        std::optional<std::uint64_t> shuffle_seed) {
  if (batch_size == 0 || max_len == 0) {
    throw ContractError("make_batches: batch_size and max_len must be positive");
  }
  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), 0);
  if (shuffle_seed && order.size() > 1) {
    Rng rng(*shuffle_seed);
    for (std::size_t i = order.size() - 1; i > 0; --i) std::swap(order[i], order[rng.below(i + 1)]);
  }
  std::vector<SequenceBatch> batches;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const std::size_t end = std::min(order.size(), start + batch_size);
    SequenceBatch batch;
    batch.batch_size = end - start;
    for (std::size_t i = start; i < end; ++i) {
      const std::size_t len = std::min(examples[order[i]].ids.size(), max_len);
      batch.max_len = std::max(batch.max_len, len);
    }
    batch.ids.assign(batch.batch_size * batch.max_len, kPadId);
    batch.mask.assign(batch.batch_size * batch.max_len, 0);
    for (std::size_t i = start; i < end; ++i) {
      const EncodedExample& ex = examples[order[i]];
      const std::size_t b = i - start;
      const std::size_t len = std::min(ex.ids.size(), max_len);
      batch.lengths.push_back(len);
      batch.labels.push_back(ex.label);
      batch.example_index.push_back(order[i]);
      for (std::size_t t = 0; t < len; ++t) {
        batch.ids[b * batch.max_len + t] = ex.ids[t];
        batch.mask[b * batch.max_len + t] = 1;
      }
    }
    batches.push_back(std::move(batch));
  }
  return batches;
}

}  // namespace gatedattn
