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
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "gatedattn/batch.hpp"
#include "gatedattn/tensor.hpp"

namespace gatedattn {

// Lowercases and splits on whitespace, with punctuation as standalone tokens.
// A leading apostrophe stays attached ("'s"), internal apostrophes and hyphens
// stay inside the word, and "<br />" is kept as one token.
std::vector<std::string> tokenize(const std::string& text);

struct TextExample {
  std::vector<std::string> tokens;
  std::string label;
  // Positions of class-determining tokens; only the synthetic task fills this.
  std::vector<std::size_t> gold;
};

struct EncodedExample {
  std::vector<std::size_t> ids;
  int label = 0;
  std::vector<std::size_t> gold;
};

class Vocab {
 public:
  static constexpr const char* kPadToken = "<pad>";
  static constexpr const char* kUnkToken = "<unk>";

  Vocab();

  // Tokens seen at least min_freq times, ids assigned by descending frequency
  // then lexicographic order.
  static Vocab build(const std::vector<TextExample>& examples, std::size_t min_freq = 2);

  std::size_t size() const { return tokens_.size(); }
  // kUnkId for unknown tokens.
  std::size_t id(const std::string& token) const;
  bool contains(const std::string& token) const { return ids_.count(token) != 0; }
  const std::string& token(std::size_t id) const { return tokens_.at(id); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  // "token<TAB>id" lines.
  void save(const std::string& path) const;
  static Vocab load(const std::string& path);

  bool operator==(const Vocab& other) const { return tokens_ == other.tokens_; }

 private:
  void add(const std::string& token);

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::size_t> ids_;
};

// Class names to dense ids in first-seen order.
class LabelMap {
 public:
  static LabelMap fit(const std::vector<TextExample>& examples);

  std::size_t size() const { return names_.size(); }
  // Throws ParseError for a label missing from the mapping.
  int id(const std::string& label) const;
  const std::string& name(int id) const { return names_.at(static_cast<std::size_t>(id)); }
  const std::vector<std::string>& names() const { return names_; }

  void save(const std::string& path) const;
  static LabelMap load(const std::string& path);

  bool operator==(const LabelMap& other) const { return names_ == other.names_; }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, int> ids_;
};

std::vector<EncodedExample> encode(const std::vector<TextExample>& examples, const Vocab& vocab,
                                   const LabelMap& labels);

struct EmbeddingTable {
  Tensor matrix;  // [|V| x E]
  std::size_t found = 0;  // vocab tokens present in the file, PAD/UNK excluded
  double coverage = 0.0;  // found / (|V| - 2)
};

// Rows drawn from N(0, 0.1^2) under `seed`, PAD row zero.
EmbeddingTable random_embeddings(const Vocab& vocab, std::size_t dim, std::uint64_t seed);

// GloVe text format, "word v1 ... vE" per line. The dimension comes from the
// first line; a later line with a different count or an unreadable number
// throws ParseError with its line number. Tokens absent from the file get
// seeded Gaussian rows as in random_embeddings. If expected_dim is given, a
// file of another dimension is rejected.
EmbeddingTable load_embeddings(const std::string& path, const Vocab& vocab, std::uint64_t seed,
                               std::optional<std::size_t> expected_dim = std::nullopt);

enum class DatasetFormat { tsv_label_text, trec_native };

DatasetFormat parse_dataset_format(const std::string& name);

// tsv_label_text: "label<TAB>text". trec_native: "COARSE:fine text".
// Blank lines are skipped; other malformed lines throw ParseError.
std::vector<TextExample> read_dataset(const std::string& path, DatasetFormat format);

struct SynthOptions {
  std::size_t n_examples = 10000;
  std::size_t vocab_size = 200;  // including PAD and UNK
  std::size_t seq_len = 40;
  std::size_t n_keywords = 4;
  std::size_t n_classes = 4;
  std::uint64_t seed = 1;
};

// seq_len uniform noise tokens with one keyword at a uniform position; the
// keyword decides the class. Noise never contains a keyword. Tokens are named
// "w<n>". The keyword set depends only on structure_seed, so train and test
// sets drawn with different options.seed share it.
std::vector<TextExample> synth_keyword_task(const SynthOptions& options,
                                            std::uint64_t structure_seed = 0);

// Keyword i labels its examples "c<i mod n_classes>".
std::vector<std::string> synth_keywords(const SynthOptions& options,
                                        std::uint64_t structure_seed = 0);

// Truncates to max_len keeping the head, pads each batch to its longest
// member. Order is the input order unless shuffle_seed is given.
std::vector<SequenceBatch> make_batches(const std::vector<EncodedExample>& examples,
                                        std::size_t batch_size, std::size_t max_len,
                                        std::optional<std::uint64_t> shuffle_seed = std::nullopt);

}  // namespace gatedattn
