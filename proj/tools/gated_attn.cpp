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

#include <cstdio>
#include <exception>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gatedattn/app.hpp"
#include "gatedattn/errors.hpp"
#include "gatedattn/kernels.hpp"

namespace {

namespace ga = gatedattn;

constexpr int kExitConfig = 1;
constexpr int kExitRuntime = 2;

struct CommonFlags {
  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::string gate_mode = "threshold";
  std::string out;
};

ga::GateMode parse_gate_mode(const std::string& name) {
  if (name == "sample") return ga::GateMode::sample;
  if (name == "threshold") return ga::GateMode::threshold;
  throw ga::ConfigError("--gate-mode expects sample or threshold, got '" + name + "'");
}

// Config file first, then --set overrides in order, then --seed.
ga::RunConfig resolve_config(const CommonFlags& f, bool gate_mode_given) {
  ga::RunConfig c = f.config_path.empty() ? ga::default_run_config() : ga::load_config(f.config_path);
  for (const auto& s : f.overrides) ga::apply_setting(c, s);
  if (f.seed) c.train.seed = *f.seed;
  if (gate_mode_given) c.train.gate_mode = parse_gate_mode(f.gate_mode);
  return c;
}

std::vector<std::string> split_values(const std::string& list) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : list) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  ga::kernels::configure_threads_from_env();

  CLI::App app{"Gated attention sequence classifier"};
  app.require_subcommand(1);

  CommonFlags f;
  auto add_config_flags = [&f](CLI::App* sub) {
    sub->add_option("--config", f.config_path, "key=value config file")->check(CLI::ExistingFile);
    sub->add_option("--set", f.overrides, "override, key=value (repeatable)")->take_all();
  };

  auto* train = app.add_subcommand("train", "train a model and write a run directory");
  add_config_flags(train);
  train->add_option("--seed", f.seed, "training seed");
  auto* train_gate = train->add_option("--gate-mode", f.gate_mode, "evaluation gates: sample or threshold");
  train->add_option("--out", f.out, "run directory")->required();

  ga::EvalRequest eval_req;
  std::string eval_data;
  std::string eval_format;
  std::uint64_t eval_seed = 0;
  auto* eval = app.add_subcommand("eval", "evaluate a trained run");
  eval->add_option("--run", eval_req.run_dir, "run directory")->required();
  eval->add_option("--data", eval_data, "dataset file (default: the run's test split)");
  eval->add_option("--data-format", eval_format, "tsv_label_text or trec_native");
  eval->add_option("--gate-mode", f.gate_mode, "sample or threshold");
  eval->add_option("--seed", eval_seed, "gate sampling seed");

  ga::ExplainRequest explain_req;
  std::string explain_text;
  std::string explain_format = "json_lines";
  std::uint64_t explain_seed = 0;
  auto* explain = app.add_subcommand("explain", "export attention records");
  explain->add_option("--run", explain_req.run_dir, "run directory")->required();
  explain->add_option("--text", explain_text, "raw input text");
  explain->add_option("--begin", explain_req.slice_begin, "first test example");
  explain->add_option("--end", explain_req.slice_end, "one past the last test example");
  explain->add_option("--out", explain_req.out_path, "output file");
  explain->add_option("--format", explain_format, "json_lines or html_heatmap");
  explain->add_option("--gate-mode", f.gate_mode, "sample or threshold");
  explain->add_option("--seed", explain_seed, "gate sampling seed");

  std::string axis;
  std::string values;
  std::size_t parallel = 1;
  auto* sweep = app.add_subcommand("sweep", "train one run per value of an axis");
  add_config_flags(sweep);
  sweep->add_option("--seed", f.seed, "shared training seed");
  sweep->add_option("--axis", axis, "aux_hidden, lambda, tau or aux_variant")->required();
  sweep->add_option("--values", values, "comma-separated values")->required();
  sweep->add_option("--parallel", parallel, "children run at once")->check(CLI::PositiveNumber);
  sweep->add_option("--out", f.out, "sweep directory")->required();

  auto* synth = app.add_subcommand("synth-data", "write the synthetic keyword task to disk");
  add_config_flags(synth);
  synth->add_option("--out", f.out, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*train) {
      const auto result = ga::run_train(resolve_config(f, train_gate->count() > 0), f.out);
      std::cout << result.metrics;
      if (result.report.diverged) {
        std::cerr << "error: training diverged: " << result.report.divergence << '\n';
        return kExitRuntime;
      }
    } else if (*eval) {
      if (!eval_data.empty()) eval_req.data_path = eval_data;
      if (!eval_format.empty()) eval_req.data_format = eval_format;
      eval_req.gate_mode = parse_gate_mode(f.gate_mode);
      eval_req.seed = eval_seed;
      std::cout << ga::run_eval(eval_req);
    } else if (*explain) {
      if (!explain_text.empty() || explain->count("--text") > 0) explain_req.text = explain_text;
      explain_req.format = ga::parse_export_format(explain_format);
      explain_req.gate_mode = parse_gate_mode(f.gate_mode);
      explain_req.seed = explain_seed;
      std::string path;
      const auto records = ga::run_explain(explain_req, &path);
      std::cout << "records=" << records.size() << "\nout=" << path << '\n';
    } else if (*sweep) {
      const auto rows = ga::run_sweep(resolve_config(f, false), axis, split_values(values), f.out, parallel);
      std::cout << ga::format_sweep(axis, rows);
    } else if (*synth) {
      ga::run_synth_data(resolve_config(f, false), f.out);
      std::cout << "out=" << f.out << '\n';
    }
  } catch (const ga::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return 0;
}
