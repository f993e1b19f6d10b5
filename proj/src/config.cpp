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

#include "gatedattn/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include <fmt/format.h>

#include "gatedattn/errors.hpp"

namespace gatedattn {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const char* first = value.data();
  const char* last = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(first, last, out);
  if (ec != std::errc() || ptr != last || value.empty()) {
    throw ConfigError(fmt::format("{}: cannot parse '{}'", key, value));
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw ConfigError(fmt::format("{}: expected true or false, got '{}'", key, value));
}

std::string format_double(double v) { return fmt::format("{}", v); }

struct Field {
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <typename T>
Field number_field(T RunConfig::*member) {
  return {[member](RunConfig& c, const std::string& v) {
            c.*member = parse_number<T>("", v);
          },
          [member](const RunConfig& c) { return fmt::format("{}", c.*member); }};
}

// Ordered so config_to_text is stable.
const std::vector<std::pair<std::string, Field>>& fields() {
  static const std::vector<std::pair<std::string, Field>> table = [] {
    std::vector<std::pair<std::string, Field>> t;
    auto str = [](std::string RunConfig::*m) {
      return Field{[m](RunConfig& c, const std::string& v) { c.*m = v; },
                   [m](const RunConfig& c) { return c.*m; }};
    };
    t.emplace_back("data_format", Field{[](RunConfig& c, const std::string& v) {
                                          if (v != "synthetic") parse_dataset_format(v);
                                          c.data_format = v;
                                        },
                                        [](const RunConfig& c) { return c.data_format; }});
    t.emplace_back("train_path", str(&RunConfig::train_path));
    t.emplace_back("test_path", str(&RunConfig::test_path));
    t.emplace_back("valid_path", str(&RunConfig::valid_path));
    t.emplace_back("valid_fraction", number_field(&RunConfig::valid_fraction));
    t.emplace_back("embeddings_path", str(&RunConfig::embeddings_path));
    t.emplace_back("min_freq", number_field(&RunConfig::min_freq));
    t.emplace_back("synth_train", number_field(&RunConfig::synth_train));
    t.emplace_back("synth_test", number_field(&RunConfig::synth_test));
    t.emplace_back("synth_vocab", number_field(&RunConfig::synth_vocab));
    t.emplace_back("synth_seq_len", number_field(&RunConfig::synth_seq_len));
    t.emplace_back("synth_keywords", number_field(&RunConfig::synth_keywords));
    t.emplace_back("synth_classes", number_field(&RunConfig::synth_classes));
    t.emplace_back("synth_seed", number_field(&RunConfig::synth_seed));

    auto model_size = [](std::size_t ModelConfig::*m) {
      return Field{[m](RunConfig& c, const std::string& v) {
                     c.model.*m = parse_number<std::size_t>("", v);
                   },
                   [m](const RunConfig& c) { return std::to_string(c.model.*m); }};
    };
    auto model_bool = [](bool ModelConfig::*m) {
      return Field{[m](RunConfig& c, const std::string& v) { c.model.*m = parse_bool("", v); },
                   [m](const RunConfig& c) { return std::string(c.model.*m ? "true" : "false"); }};
    };
    t.emplace_back("attention", Field{[](RunConfig& c, const std::string& v) {
                                        c.model.attention = parse_attention_kind(v);
                                      },
                                      [](const RunConfig& c) { return to_string(c.model.attention); }});
    t.emplace_back("aux_variant", Field{[](RunConfig& c, const std::string& v) {
                                          c.model.aux_variant = parse_aux_variant(v);
                                        },
                                        [](const RunConfig& c) { return to_string(c.model.aux_variant); }});
    t.emplace_back("embed_dim", model_size(&ModelConfig::embed_dim));
    t.emplace_back("hidden", model_size(&ModelConfig::hidden));
    t.emplace_back("layers", model_size(&ModelConfig::layers));
    t.emplace_back("aux_hidden", model_size(&ModelConfig::aux_hidden));
    t.emplace_back("local_window", model_size(&ModelConfig::local_window));
    t.emplace_back("local_gaussian", model_bool(&ModelConfig::local_gaussian));
    t.emplace_back("finetune_embeddings", model_bool(&ModelConfig::finetune_embeddings));

    auto train_double = [](double TrainConfig::*m) {
      return Field{[m](RunConfig& c, const std::string& v) {
                     c.train.*m = parse_number<double>("", v);
                   },
                   [m](const RunConfig& c) { return format_double(c.train.*m); }};
    };
    t.emplace_back("learning_rate", train_double(&TrainConfig::learning_rate));
    t.emplace_back("batch_size", Field{[](RunConfig& c, const std::string& v) {
                                         c.train.batch_size = parse_number<std::size_t>("", v);
                                       },
                                       [](const RunConfig& c) { return std::to_string(c.train.batch_size); }});
    t.emplace_back("tau", train_double(&TrainConfig::tau));
    t.emplace_back("lambda", train_double(&TrainConfig::lambda));
    t.emplace_back("epochs", Field{[](RunConfig& c, const std::string& v) {
                                     c.train.epochs = parse_number<std::size_t>("", v);
                                   },
                                   [](const RunConfig& c) { return std::to_string(c.train.epochs); }});
    t.emplace_back("seed", Field{[](RunConfig& c, const std::string& v) {
                                   c.train.seed = parse_number<std::uint64_t>("", v);
                                 },
                                 [](const RunConfig& c) { return std::to_string(c.train.seed); }});
    t.emplace_back("gate_mode", Field{[](RunConfig& c, const std::string& v) {
                                        if (v == "threshold") {
                                          c.train.gate_mode = GateMode::threshold;
                                        } else if (v == "sample") {
                                          c.train.gate_mode = GateMode::sample;
                                        } else {
                                          throw ConfigError("expected sample or threshold, got '" + v + "'");
                                        }
                                      },
                                      [](const RunConfig& c) {
                                        return std::string(c.train.gate_mode == GateMode::sample
                                                               ? "sample"
                                                               : "threshold");
                                      }});
    t.emplace_back("max_len", Field{[](RunConfig& c, const std::string& v) {
                                      c.train.max_len = parse_number<std::size_t>("", v);
                                    },
                                    [](const RunConfig& c) { return std::to_string(c.train.max_len); }});
    t.emplace_back("clip_norm", train_double(&TrainConfig::clip_norm));
    t.emplace_back("allow_off_grid", Field{[](RunConfig& c, const std::string& v) {
                                             c.train.allow_off_grid = parse_bool("", v);
                                           },
                                           [](const RunConfig& c) {
                                             return std::string(c.train.allow_off_grid ? "true" : "false");
                                           }});
    return t;
  }();
  return table;
}

const Field* find_field(const std::string& key) {
  for (const auto& [name, field] : fields()) {
    if (name == key) return &field;
  }
  return nullptr;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

RunConfig default_run_config() {
  RunConfig c;
  c.model.embed_dim = 100;
  c.model.hidden = 100;
  c.model.layers = 2;
  return c;
}

void apply_setting(RunConfig& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError("expected key=value, got '" + assignment + "'");
  const std::string key = trim(assignment.substr(0, eq));
  const std::string value = trim(assignment.substr(eq + 1));
  const Field* field = find_field(key);
  if (field == nullptr) throw ConfigError("unknown config key '" + key + "'");
  try {
    field->set(config, value);
  } catch (const ConfigError& e) {
    throw ConfigError(fmt::format("config key '{}': {}", key, e.what()));
  } catch (const std::exception& e) {
    throw ConfigError(fmt::format("config key '{}': {}", key, e.what()));
  }
}

RunConfig parse_config_text(const std::string& text, const std::string& source) {
  RunConfig config = default_run_config();
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    try {
      apply_setting(config, t);
    } catch (const ConfigError& e) {
      throw ConfigError(fmt::format("{}:{}: {}", source, lineno, e.what()));
    }
  }
  return config;
}

RunConfig load_config(const std::string& path) { return parse_config_text(read_file(path), path); }

std::string config_to_text(const RunConfig& config) {
  std::string out;
  for (const auto& [name, field] : fields()) out += name + "=" + field.get(config) + "\n";
  return out;
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& entry : fields()) keys.push_back(entry.first);
  return keys;
}

std::uint64_t fnv1a64(const std::string& bytes, std::uint64_t hash) {
  for (unsigned char c : bytes) {
    hash ^= c;
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

std::uint64_t input_hash(const RunConfig& config) {
  std::uint64_t h = fnv1a64(config_to_text(config));
  for (const std::string* path : {&config.train_path, &config.valid_path, &config.test_path,
                                  &config.embeddings_path}) {
    if (path->empty()) continue;
    std::ifstream in(*path, std::ios::binary);
    if (!in) throw ConfigError("cannot read " + *path);
    char buf[1 << 16];
    while (in.read(buf, sizeof buf) || in.gcount() > 0) {
      h = fnv1a64(std::string(buf, static_cast<std::size_t>(in.gcount())), h);
    }
  }
  return h;
}

std::string manifest_text(const RunConfig& config) {
  return fmt::format(
      "# gated-attention run manifest\n"
      "# input_hash={:016x}\n"
      "# layout=manifest.txt checkpoint.bin report.log vocab.tsv labels.tsv records/\n"
      "{}",
      input_hash(config), config_to_text(config));
}

}  // namespace gatedattn
