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

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "gatedattn/config.hpp"
#include "gatedattn/data.hpp"
#include "gatedattn/instrumentation.hpp"
#include "gatedattn/model.hpp"
#include "gatedattn/training.hpp"

namespace gatedattn {

// Files inside a run directory.
inline constexpr const char* kManifestFile = "manifest.txt";
inline constexpr const char* kCheckpointFile = "checkpoint.bin";
inline constexpr const char* kReportFile = "report.log";
inline constexpr const char* kVocabFile = "vocab.tsv";
inline constexpr const char* kLabelsFile = "labels.tsv";
inline constexpr const char* kRecordsDir = "records";

struct Splits {
  std::vector<TextExample> train;
  std::vector<TextExample> valid;
  std::vector<TextExample> test;
};

// Reads or generates the three splits named by the config. Without a
// valid_path the validation set is a fixed-seed random valid_fraction of train.
Splits load_splits(const RunConfig& config);

struct PreparedRun {
  RunConfig config;
  Vocab vocab;
  LabelMap labels;
  Splits text;
  std::vector<EncodedExample> train;
  std::vector<EncodedExample> valid;
  std::vector<EncodedExample> test;
  EmbeddingTable embeddings;
  ModelConfig model;  // vocab_size, num_classes and init_seed resolved
};

// Vocabulary and labels come from the training split only.
PreparedRun prepare_run(const RunConfig& config);

// Key/value metric lines, printed in insertion order as "key=value".
class MetricLines {
 public:
  void add(const std::string& key, const std::string& value);
  void add(const std::string& key, double value);
  void add(const std::string& key, std::uint64_t value);
  std::string text() const;

 private:
  std::vector<std::pair<std::string, std::string>> lines_;
};

void append_eval_metrics(MetricLines& out, const std::string& prefix, const EvalResult& eval,
                         bool has_gold);

struct TrainRunResult {
  TrainReport report;
  EvalResult test;
  std::string metrics;  // key=value lines also written to stdout
};

// Trains, evaluates on the test split and writes the run directory
// (manifest, checkpoint, report log, vocab, labels, records/).
TrainRunResult run_train(const RunConfig& config, const std::string& out_dir);

// A trained model restored from a run directory.
struct LoadedRun {
  RunConfig config;
  Vocab vocab;
  LabelMap labels;
  GatedAttentionModel model;
};

// Throws ContractError if checkpoint, vocabulary and labels disagree.
LoadedRun load_run(const std::string& run_dir);

struct EvalRequest {
  std::string run_dir;
  std::optional<std::string> data_path;  // default: the run's test split
  std::optional<std::string> data_format;
  GateMode gate_mode = GateMode::threshold;
  std::uint64_t seed = 0;
};

std::string run_eval(const EvalRequest& request);

struct ExplainRequest {
  std::string run_dir;
  std::optional<std::string> text;
  std::size_t slice_begin = 0;  // test examples [begin, end) when text is absent
  std::size_t slice_end = 10;
  std::string out_path;  // default: <run_dir>/records/explain.<ext>
  ExportFormat format = ExportFormat::json_lines;
  GateMode gate_mode = GateMode::threshold;
  std::uint64_t seed = 0;
};

// Returns the records it exported. Throws ConfigError for text without tokens.
std::vector<AttentionRecord> run_explain(const ExplainRequest& request, std::string* written_path = nullptr);

// Records for a set of encoded examples with their source tokens.
std::vector<AttentionRecord> attention_records(const GatedAttentionModel& model,
                                               const LabelMap& labels,
                                               const std::vector<TextExample>& text,
                                               const std::vector<EncodedExample>& encoded,
                                               GateMode gate_mode, std::uint64_t seed,
                                               std::size_t max_len);

struct SweepRow {
  std::string value;
  bool ok = false;
  std::string error;
  double test_accuracy = 0.0;
  double test_density = 0.0;
};

inline const std::vector<std::string> kSweepAxes = {"aux_hidden", "lambda", "tau", "aux_variant"};

// One child run per value in <out_dir>/<axis>=<value>, sharing the seed. A
// failing child is recorded and the sweep continues. parallel > 1 runs that
// many children at once.
std::vector<SweepRow> run_sweep(const RunConfig& config, const std::string& axis,
                                const std::vector<std::string>& values, const std::string& out_dir,
                                std::size_t parallel = 1);

std::string format_sweep(const std::string& axis, const std::vector<SweepRow>& rows);

// Writes train.tsv, test.tsv (label<TAB>text), matching .gold files (one line
// of space-separated keyword positions per example) and keywords.tsv.
void run_synth_data(const RunConfig& config, const std::string& out_dir);

}  // namespace gatedattn
