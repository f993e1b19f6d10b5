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

#include "gatedattn/app.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <thread>

#include <fmt/format.h>

#include "gatedattn/checkpoint.hpp"
#include "gatedattn/errors.hpp"
#include "gatedattn/stochastic.hpp"

namespace gatedattn {

namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kValidSplitSeed = 0x5A11D;
constexpr std::uint64_t kEmbeddingStream = 0xE3B;
constexpr std::uint64_t kTestEvalStream = 0x7E57;
constexpr std::uint64_t kCheckpointRngStream = 0xC4E;
constexpr std::size_t kEvalBatch = 64;
constexpr std::size_t kRecordsExported = 20;

std::vector<TextExample> read_split(const RunConfig& c, const std::string& path) {
  if (!fs::exists(path)) throw ConfigError("data file not found: " + path);
  return read_dataset(path, parse_dataset_format(c.data_format));
}

SynthOptions synth_options(const RunConfig& c, std::size_t n, std::uint64_t seed) {
  SynthOptions o;
  o.n_examples = n;
  o.vocab_size = c.synth_vocab;
  o.seq_len = c.synth_seq_len;
  o.n_keywords = c.synth_keywords;
  o.n_classes = c.synth_classes;
  o.seed = seed;
  return o;
}

std::vector<TextExample> synth_train(const RunConfig& c) {
  return synth_keyword_task(synth_options(c, c.synth_train, c.synth_seed), c.synth_seed);
}

std::vector<TextExample> synth_test(const RunConfig& c) {
  return synth_keyword_task(synth_options(c, c.synth_test, mix_seed(c.synth_seed, 1)), c.synth_seed);
}

std::string fixed(double v) { return fmt::format("{:.6f}", v); }

std::ofstream open_or_throw(const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

ModelConfig resolve_model(const RunConfig& c, std::size_t vocab_size, std::size_t classes) {
  ModelConfig m = c.model;
  m.vocab_size = vocab_size;
  m.num_classes = classes;
  m.init_seed = c.train.seed;
  return m;
}

EvalOptions eval_options(const RunConfig& c, GateMode mode, std::uint64_t seed) {
  EvalOptions o;
  o.gate_mode = mode;
  o.seed = seed;
  o.batch_size = kEvalBatch;
  o.max_len = c.train.max_len;
  return o;
}

}  // namespace

Splits load_splits(const RunConfig& c) {
  Splits s;
  std::vector<TextExample> train;
  if (c.data_format == "synthetic") {
    train = synth_train(c);
    s.test = synth_test(c);
  } else {
    if (c.train_path.empty()) throw ConfigError("train_path is required for " + c.data_format);
    if (c.test_path.empty()) throw ConfigError("test_path is required for " + c.data_format);
    train = read_split(c, c.train_path);
    s.test = read_split(c, c.test_path);
  }
  if (!c.valid_path.empty()) {
    s.train = std::move(train);
    s.valid = read_split(c, c.valid_path);
    return s;
  }
  if (!(c.valid_fraction > 0.0 && c.valid_fraction < 1.0)) {
    throw ConfigError("valid_fraction must lie in (0, 1) when valid_path is empty");
  }
  const auto n_valid = static_cast<std::size_t>(std::llround(c.valid_fraction * static_cast<double>(train.size())));
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(kValidSplitSeed);
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  std::vector<std::uint8_t> is_valid(train.size(), 0);
  for (std::size_t i = 0; i < n_valid && i < order.size(); ++i) is_valid[order[i]] = 1;
  for (std::size_t i = 0; i < train.size(); ++i) {
    (is_valid[i] ? s.valid : s.train).push_back(std::move(train[i]));
  }
  return s;
}

PreparedRun prepare_run(const RunConfig& config) {
  PreparedRun run;
  run.config = config;
  run.text = load_splits(config);
  if (run.text.train.empty()) throw ContractError("training split is empty");
  run.vocab = Vocab::build(run.text.train, config.min_freq);
  run.labels = LabelMap::fit(run.text.train);
  if (run.labels.size() < 2) throw ContractError("training split has fewer than two classes");
  run.train = encode(run.text.train, run.vocab, run.labels);
  run.valid = encode(run.text.valid, run.vocab, run.labels);
  run.test = encode(run.text.test, run.vocab, run.labels);
  const std::uint64_t emb_seed = mix_seed(config.train.seed, kEmbeddingStream);
  if (config.embeddings_path.empty()) {
    run.embeddings = random_embeddings(run.vocab, config.model.embed_dim, emb_seed);
  } else {
    if (!fs::exists(config.embeddings_path)) {
      throw ConfigError("embeddings file not found: " + config.embeddings_path);
    }
    run.embeddings =
        load_embeddings(config.embeddings_path, run.vocab, emb_seed, config.model.embed_dim);
  }
  run.model = resolve_model(config, run.vocab.size(), run.labels.size());
  return run;
}

void MetricLines::add(const std::string& key, const std::string& value) {
  lines_.emplace_back(key, value);
}

void MetricLines::add(const std::string& key, double value) { add(key, fixed(value)); }

void MetricLines::add(const std::string& key, std::uint64_t value) {
  add(key, std::to_string(value));
}

std::string MetricLines::text() const {
  std::string out;
  for (const auto& [k, v] : lines_) out += k + "=" + v + "\n";
  return out;
}

void append_eval_metrics(MetricLines& out, const std::string& prefix, const EvalResult& eval,
                         bool has_gold) {
  out.add(prefix + "examples", static_cast<std::uint64_t>(eval.examples));
  out.add(prefix + "accuracy", eval.accuracy);
  out.add(prefix + "density", eval.density);
  out.add(prefix + "attention_flops", eval.flops.attention_flops);
  out.add(prefix + "dense_attention_flops", eval.dense_flops.attention_flops);
  const double ratio = eval.dense_flops.attention_flops == 0
                           ? 0.0
                           : static_cast<double>(eval.flops.attention_flops) /
                                 static_cast<double>(eval.dense_flops.attention_flops);
  out.add(prefix + "flops_ratio", ratio);
  out.add(prefix + "attention_flops_per_example",
          eval.examples == 0 ? 0.0
                             : static_cast<double>(eval.flops.attention_flops) /
                                   static_cast<double>(eval.examples));
  out.add(prefix + "fallback_events", static_cast<std::uint64_t>(eval.fallback_events));
  if (has_gold) {
    out.add(prefix + "gate_precision", eval.gate_counts.precision());
    out.add(prefix + "gate_recall", eval.gate_counts.recall());
  }
}

TrainRunResult run_train(const RunConfig& config, const std::string& out_dir) {
  config.train.validate();
  const fs::path dir(out_dir);
  fs::create_directories(dir / kRecordsDir);
  PreparedRun prep = prepare_run(config);
  {
    auto manifest = open_or_throw(dir / kManifestFile);
    manifest << manifest_text(config);
  }
  prep.vocab.save((dir / kVocabFile).string());
  prep.labels.save((dir / kLabelsFile).string());

  GatedAttentionModel model(prep.model, prep.embeddings.matrix);
  auto log = open_or_throw(dir / kReportFile);
  log << "# epoch=<n> train_loss=<mean joint loss> val_acc=<fraction> "
         "val_density=<open/valid> wall_ms=<elapsed>\n";
  TrainRunResult result;
  result.report = train(model, prep.train, prep.valid, config.train, [&](const EpochRecord& r) {
    log << format_epoch(r) << '\n';
    log.flush();
  });

  const bool has_gold = std::any_of(prep.test.begin(), prep.test.end(),
                                    [](const EncodedExample& e) { return !e.gold.empty(); });
  result.test = evaluate(model, prep.test,
                         eval_options(config, config.train.gate_mode,
                                      mix_seed(config.train.seed, kTestEvalStream)));

  MetricLines m;
  m.add("attention", to_string(config.model.attention));
  m.add("seed", config.train.seed);
  m.add("vocab_size", static_cast<std::uint64_t>(prep.vocab.size()));
  if (!config.embeddings_path.empty()) m.add("embedding_coverage", prep.embeddings.coverage);
  m.add("epochs_run", static_cast<std::uint64_t>(result.report.epochs.size()));
  m.add("best_epoch", static_cast<std::uint64_t>(result.report.best_epoch));
  m.add("best_val_acc", result.report.best_val_acc);
  m.add("best_val_density", result.report.best_val_density);
  append_eval_metrics(m, "test_", result.test, has_gold);
  m.add("diverged", std::string(result.report.diverged ? "true" : "false"));
  result.metrics = m.text();
  log << "# final\n" << result.metrics;
  if (result.report.diverged) log << "# divergence: " << result.report.divergence << '\n';

  Checkpoint ck;
  ck.config = config_to_text(config);
  ck.tensors = model.state();
  ck.rng_state = Rng(mix_seed(config.train.seed, kCheckpointRngStream)).state();
  save_checkpoint((dir / kCheckpointFile).string(), ck);

  const std::size_t n = std::min(kRecordsExported, prep.test.size());
  const std::vector<TextExample> text(prep.text.test.begin(), prep.text.test.begin() + static_cast<std::ptrdiff_t>(n));
  const std::vector<EncodedExample> enc(prep.test.begin(), prep.test.begin() + static_cast<std::ptrdiff_t>(n));
  export_attention(attention_records(model, prep.labels, text, enc, config.train.gate_mode,
                                     mix_seed(config.train.seed, kTestEvalStream), config.train.max_len),
                   (dir / kRecordsDir / "test.jsonl").string(), ExportFormat::json_lines);
  return result;
}

LoadedRun load_run(const std::string& run_dir) {
  const fs::path dir(run_dir);
  if (!fs::exists(dir / kCheckpointFile)) {
    throw ConfigError("no checkpoint at " + (dir / kCheckpointFile).string());
  }
  const Checkpoint ck = load_checkpoint((dir / kCheckpointFile).string());
  RunConfig config = parse_config_text(ck.config, "checkpoint config");
  Vocab vocab = Vocab::load((dir / kVocabFile).string());
  LabelMap labels = LabelMap::load((dir / kLabelsFile).string());
  const NamedParameter* emb = nullptr;
  for (const auto& t : ck.tensors) {
    if (t.name == "embedding") emb = &t;
  }
  if (emb == nullptr || emb->value.rank() != 2) throw ContractError("checkpoint has no embedding table");
  if (emb->value.dim(0) != vocab.size()) {
    throw ContractError(fmt::format("checkpoint/vocab mismatch: {} embedding rows, {} vocabulary entries",
                                    emb->value.dim(0), vocab.size()));
  }
  ModelConfig mc = resolve_model(config, vocab.size(), labels.size());
  mc.embed_dim = emb->value.dim(1);
  GatedAttentionModel model(mc, Tensor(emb->value.shape()));
  apply_checkpoint(ck, model.state());
  const auto& w = model.classifier().w;
  if (w.dim(1) != labels.size()) throw ContractError("checkpoint/label mismatch");
  return LoadedRun{std::move(config), std::move(vocab), std::move(labels), std::move(model)};
}

std::string run_eval(const EvalRequest& request) {
  const LoadedRun run = load_run(request.run_dir);
  std::vector<TextExample> text;
  if (request.data_path) {
    const std::string format = request.data_format.value_or(
        run.config.data_format == "synthetic" ? "tsv_label_text" : run.config.data_format);
    if (!fs::exists(*request.data_path)) throw ConfigError("data file not found: " + *request.data_path);
    text = read_dataset(*request.data_path, parse_dataset_format(format));
  } else {
    text = load_splits(run.config).test;
  }
  const auto data = encode(text, run.vocab, run.labels);
  const bool has_gold = std::any_of(data.begin(), data.end(),
                                    [](const EncodedExample& e) { return !e.gold.empty(); });
  const EvalResult r = evaluate(run.model, data, eval_options(run.config, request.gate_mode, request.seed));
  MetricLines m;
  m.add("attention", to_string(run.config.model.attention));
  m.add("gate_mode", std::string(request.gate_mode == GateMode::sample ? "sample" : "threshold"));
  append_eval_metrics(m, "", r, has_gold);
  return m.text();
}

std::vector<AttentionRecord> attention_records(const GatedAttentionModel& model,
                                               const LabelMap& labels,
                                               const std::vector<TextExample>& text,
                                               const std::vector<EncodedExample>& encoded,
                                               GateMode gate_mode, std::uint64_t seed,
                                               std::size_t max_len) {
  std::vector<AttentionRecord> records(encoded.size());
  const auto batches = make_batches(encoded, kEvalBatch, max_len);
  for (std::size_t bi = 0; bi < batches.size(); ++bi) {
    const SequenceBatch& batch = batches[bi];
    Rng rng(mix_seed(seed, bi));
    ForwardOptions fo;
    fo.gate_mode = gate_mode;
    fo.rng = &rng;
    const ForwardResult r = model.forward(batch, fo);
    const std::size_t classes = r.probabilities.dim(1);
    for (std::size_t b = 0; b < batch.batch_size; ++b) {
      const std::size_t idx = batch.example_index[b];
      AttentionRecord& rec = records[idx];
      const std::size_t len = batch.lengths[b];
      const std::size_t base = b * batch.max_len;
      rec.tokens.assign(text[idx].tokens.begin(), text[idx].tokens.begin() + static_cast<std::ptrdiff_t>(len));
      for (std::size_t t = 0; t < len; ++t) {
        const double alpha = r.attention.alpha[base + t];
        rec.alpha.push_back(alpha);
        if (r.gates) {
          rec.gates.push_back(r.gates->hard[base + t]);
          rec.p.push_back(r.gates->p[base + t]);
        } else {
          const bool open = model.config().attention != AttentionKind::local || alpha != 0.0;
          rec.gates.push_back(open ? 1 : 0);
          rec.p.push_back(1.0);
        }
      }
      const auto probs = r.probabilities.data().subspan(b * classes, classes);
      rec.predicted = labels.name(static_cast<int>(std::max_element(probs.begin(), probs.end()) - probs.begin()));
      rec.gold = text[idx].label;
    }
  }
  return records;
}

std::vector<AttentionRecord> run_explain(const ExplainRequest& request, std::string* written_path) {
  const LoadedRun run = load_run(request.run_dir);
  std::vector<TextExample> text;
  if (request.text) {
    TextExample ex;
    ex.tokens = tokenize(*request.text);
    if (ex.tokens.empty()) throw ConfigError("explain: input text has no tokens");
    text.push_back(std::move(ex));
  } else {
    const auto test = load_splits(run.config).test;
    const std::size_t end = std::min(request.slice_end, test.size());
    if (request.slice_begin >= end) throw ConfigError("explain: empty data slice");
    text.assign(test.begin() + static_cast<std::ptrdiff_t>(request.slice_begin),
                test.begin() + static_cast<std::ptrdiff_t>(end));
  }
  std::vector<EncodedExample> encoded;
  for (const auto& ex : text) {
    EncodedExample e;
    for (const auto& tok : ex.tokens) e.ids.push_back(run.vocab.id(tok));
    encoded.push_back(std::move(e));
  }
  auto records = attention_records(run.model, run.labels, text, encoded, request.gate_mode,
                                   request.seed, run.config.train.max_len);
  std::string path = request.out_path;
  if (path.empty()) {
    const fs::path dir = fs::path(request.run_dir) / kRecordsDir;
    fs::create_directories(dir);
    path = (dir / (request.format == ExportFormat::json_lines ? "explain.jsonl" : "explain.html")).string();
  }
  export_attention(records, path, request.format);
  if (written_path != nullptr) *written_path = path;
  return records;
}

std::vector<SweepRow> run_sweep(const RunConfig& config, const std::string& axis,
                                const std::vector<std::string>& values, const std::string& out_dir,
                                std::size_t parallel) {
  if (std::find(kSweepAxes.begin(), kSweepAxes.end(), axis) == kSweepAxes.end()) {
    throw ConfigError("unknown sweep axis '" + axis + "'");
  }
  if (values.empty()) throw ConfigError("sweep needs at least one value");
  std::vector<SweepRow> rows(values.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < values.size(); i = next++) {
      rows[i].value = values[i];
      try {
        RunConfig child = config;
        apply_setting(child, axis + "=" + values[i]);
        const auto r = run_train(child, (fs::path(out_dir) / (axis + "=" + values[i])).string());
        rows[i].ok = !r.report.diverged;
        if (r.report.diverged) rows[i].error = r.report.divergence;
        rows[i].test_accuracy = r.test.accuracy;
        rows[i].test_density = r.test.density;
      } catch (const std::exception& e) {
        rows[i].error = e.what();
      }
    }
  };
  const std::size_t threads = std::clamp<std::size_t>(parallel, 1, values.size());
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  fs::create_directories(out_dir);
  auto summary = open_or_throw(fs::path(out_dir) / "summary.tsv");
  summary << format_sweep(axis, rows);
  return rows;
}

std::string format_sweep(const std::string& axis, const std::vector<SweepRow>& rows) {
  std::string out = axis + "\tstatus\ttest_accuracy\ttest_density\n";
  for (const auto& r : rows) {
    out += fmt::format("{}\t{}\t{}\t{}\n", r.value, r.ok ? "ok" : "failed",
                       r.ok ? fixed(r.test_accuracy) : "-", r.ok ? fixed(r.test_density) : "-");
  }
  return out;
}

void run_synth_data(const RunConfig& config, const std::string& out_dir) {
  const fs::path dir(out_dir);
  fs::create_directories(dir);
  auto write = [&](const std::string& name, const std::vector<TextExample>& data) {
    auto tsv = open_or_throw(dir / (name + ".tsv"));
    auto gold = open_or_throw(dir / (name + ".gold"));
    for (const auto& ex : data) {
      tsv << ex.label << '\t';
      for (std::size_t i = 0; i < ex.tokens.size(); ++i) tsv << (i ? " " : "") << ex.tokens[i];
      tsv << '\n';
      for (std::size_t i = 0; i < ex.gold.size(); ++i) gold << (i ? " " : "") << ex.gold[i];
      gold << '\n';
    }
  };
  write("train", synth_train(config));
  write("test", synth_test(config));
  const auto keywords = synth_keywords(synth_options(config, 0, config.synth_seed), config.synth_seed);
  auto kw = open_or_throw(dir / "keywords.tsv");
  for (std::size_t i = 0; i < keywords.size(); ++i) {
    kw << keywords[i] << "\tc" << i % config.synth_classes << '\n';
  }
}

}  // namespace gatedattn
