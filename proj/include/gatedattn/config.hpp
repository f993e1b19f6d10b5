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
#include <string>
#include <vector>

#include "gatedattn/data.hpp"
#include "gatedattn/model.hpp"
#include "gatedattn/training.hpp"

namespace gatedattn {

// Everything a run depends on. Serialised as flat "key=value" lines.
struct RunConfig {
  // data_format: synthetic, tsv_label_text or trec_native
  std::string data_format = "synthetic";
  std::string train_path;
  std::string test_path;
  std::string valid_path;        // empty: hold out valid_fraction of train
  double valid_fraction = 0.1;
  std::string embeddings_path;   // empty: seeded random embeddings
  std::size_t min_freq = 2;

  std::size_t synth_train = 8000;
  std::size_t synth_test = 2000;
  std::size_t synth_vocab = 200;
  std::size_t synth_seq_len = 40;
  std::size_t synth_keywords = 4;
  std::size_t synth_classes = 4;
  std::uint64_t synth_seed = 7;

  ModelConfig model;   // vocab_size and num_classes come from the data
  TrainConfig train;   // train.seed also seeds model initialisation
};

RunConfig default_run_config();

// Applies one "key=value" assignment. Throws ConfigError naming an unknown
// key or an unparsable value.
void apply_setting(RunConfig& config, const std::string& assignment);

// Lines of "key=value"; blank lines and lines starting with '#' are ignored.
// Errors carry the file name and line number.
RunConfig parse_config_text(const std::string& text, const std::string& source = "config");
RunConfig load_config(const std::string& path);

// Every key in a fixed order, one "key=value" per line.
std::string config_to_text(const RunConfig& config);

std::vector<std::string> config_keys();

// FNV-1a 64-bit.
std::uint64_t fnv1a64(const std::string& bytes, std::uint64_t hash = 0xcbf29ce484222325ULL);

// Hash of the resolved config plus the bytes of every input file it names.
std::uint64_t input_hash(const RunConfig& config);

// Manifest = comment header (hash, layout) + config_to_text. It parses back
// with load_config, so re-running from a manifest reproduces the run.
std::string manifest_text(const RunConfig& config);

}  // namespace gatedattn
