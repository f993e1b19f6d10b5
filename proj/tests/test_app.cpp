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

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "gatedattn/app.hpp"
#include "gatedattn/checkpoint.hpp"
#include "gatedattn/errors.hpp"

namespace gatedattn {
namespace {

namespace fs = std::filesystem;

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string without_wall_clock(const std::string& text) {
  std::istringstream in(text);
  std::string out;
  std::string line;
  while (std::getline(in, line)) {
    const auto pos = line.find(" wall_ms=");
    out += (pos == std::string::npos ? line : line.substr(0, pos)) + "\n";
  }
  return out;
}

RunConfig tiny_config() {
  RunConfig c = default_run_config();
  c.synth_train = 160;
  c.synth_test = 40;
  c.synth_vocab = 30;
  c.synth_seq_len = 8;
  c.synth_keywords = 2;
  c.synth_classes = 2;
  c.model.embed_dim = 6;
  c.model.hidden = 4;
  c.model.layers = 1;
  c.model.aux_hidden = 4;
  c.train.epochs = 2;
  c.train.batch_size = 16;
  c.train.learning_rate = 0.01;
  return c;
}

class RunDirTest : public ::testing::Test {
 protected:
  void SetUp() override {
    root_ = fs::temp_directory_path() /
            ("gatedattn_app_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(root_);
    fs::create_directories(root_);
  }
  void TearDown() override { fs::remove_all(root_); }
  std::string dir(const std::string& name) const { return (root_ / name).string(); }

  fs::path root_;
};

TEST(Config, UnknownKeyIsNamed) {
  RunConfig c;
  try {
    apply_setting(c, "lamda=1e-4");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("lamda"), std::string::npos);
  }
  EXPECT_THROW(apply_setting(c, "epochs=many"), ConfigError);
  EXPECT_THROW(apply_setting(c, "no_equals_sign"), ConfigError);
  EXPECT_THROW(apply_setting(c, "attention=sparse"), ConfigError);
}

TEST(Config, FileErrorsCarryLineNumbers) {
  try {
    parse_config_text("# comment\nepochs=3\n\nbogus=1\n", "run.cfg");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("run.cfg:4"), std::string::npos);
  }
}

TEST(Config, TextRoundTrip) {
  RunConfig c = tiny_config();
  apply_setting(c, "lambda=1e-4");
  apply_setting(c, "attention=local");
  apply_setting(c, "gate_mode=sample");
  const std::string text = config_to_text(c);
  EXPECT_NE(text.find("lambda=0.0001\n"), std::string::npos);
  EXPECT_EQ(config_to_text(parse_config_text(text, "echo")), text);
  EXPECT_EQ(config_keys().size(), static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n')));
}

TEST(Config, LaterOverridesWin) {
  RunConfig c = parse_config_text("lambda=0.001\n", "a");
  apply_setting(c, "lambda=1e-5");
  EXPECT_EQ(c.train.lambda, 1e-5);
}

TEST_F(RunDirTest, CheckpointRoundTripIsExact) {
  Checkpoint ck;
  ck.config = "epochs=3\n";
  ck.tensors.push_back({"a", Tensor({2, 2}, {1.0, -0.0, 1e-300, 3.25})});
  ck.tensors.push_back({"b", Tensor({3}, {0.1, 0.2, 0.3})});
  ck.rng_state = "12 34";
  save_checkpoint(dir("ck.bin"), ck);
  const Checkpoint back = load_checkpoint(dir("ck.bin"));
  EXPECT_EQ(back.config, ck.config);
  EXPECT_EQ(back.rng_state, ck.rng_state);
  ASSERT_EQ(back.tensors.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(back.tensors[i].name, ck.tensors[i].name);
    EXPECT_EQ(back.tensors[i].value.shape(), ck.tensors[i].value.shape());
    const auto x = back.tensors[i].value.data();
    const auto y = ck.tensors[i].value.data();
    EXPECT_TRUE(std::equal(x.begin(), x.end(), y.begin(), y.end()));
  }
  EXPECT_TRUE(std::signbit(back.tensors[0].value.data()[1]));
}

TEST_F(RunDirTest, CorruptCheckpointsAreRejected) {
  Checkpoint ck;
  ck.tensors.push_back({"a", Tensor({4}, 1.0)});
  save_checkpoint(dir("ck.bin"), ck);
  const std::string bytes = slurp(dir("ck.bin"));
  std::ofstream(dir("trunc.bin"), std::ios::binary) << bytes.substr(0, bytes.size() - 5);
  EXPECT_THROW(load_checkpoint(dir("trunc.bin")), ParseError);
  std::ofstream(dir("magic.bin"), std::ios::binary) << "NOTACKPT" << bytes.substr(8);
  EXPECT_THROW(load_checkpoint(dir("magic.bin")), ParseError);
  std::ofstream(dir("extra.bin"), std::ios::binary) << bytes << 'x';
  EXPECT_THROW(load_checkpoint(dir("extra.bin")), ParseError);
}

TEST(Checkpoint, ApplyChecksNamesAndShapes) {
  Checkpoint ck;
  ck.tensors.push_back({"w", Tensor({2}, {5.0, 6.0})});
  const Tensor target({2});
  apply_checkpoint(ck, {{"w", target}});
  EXPECT_EQ(target.data()[1], 6.0);
  EXPECT_THROW(apply_checkpoint(ck, {{"w", Tensor({3})}}), ContractError);
  EXPECT_THROW(apply_checkpoint(ck, {{"v", Tensor({2})}}), ContractError);
}

TEST_F(RunDirTest, TrainWritesLayoutAndManifestEchoesOverrides) {
  RunConfig c = tiny_config();
  apply_setting(c, "lambda=1e-4");
  const auto r = run_train(c, dir("run"));
  for (const char* f : {kManifestFile, kCheckpointFile, kReportFile, kVocabFile, kLabelsFile}) {
    EXPECT_TRUE(fs::exists(fs::path(dir("run")) / f)) << f;
  }
  EXPECT_TRUE(fs::exists(fs::path(dir("run")) / kRecordsDir / "test.jsonl"));
  const std::string manifest = slurp(fs::path(dir("run")) / kManifestFile);
  EXPECT_NE(manifest.find("\nlambda=0.0001\n"), std::string::npos);
  EXPECT_EQ(config_to_text(load_config((fs::path(dir("run")) / kManifestFile).string())), config_to_text(c));
  EXPECT_NE(r.metrics.find("test_accuracy="), std::string::npos);
  EXPECT_NE(r.metrics.find("test_gate_recall="), std::string::npos);
}

TEST_F(RunDirTest, ManifestRerunReproducesMetricLines) {
  const RunConfig c = tiny_config();
  const auto a = run_train(c, dir("a"));
  const auto b = run_train(load_config((fs::path(dir("a")) / kManifestFile).string()), dir("b"));
  EXPECT_EQ(a.metrics, b.metrics);
  EXPECT_EQ(without_wall_clock(slurp(fs::path(dir("a")) / kReportFile)),
            without_wall_clock(slurp(fs::path(dir("b")) / kReportFile)));
  EXPECT_EQ(slurp(fs::path(dir("a")) / kCheckpointFile), slurp(fs::path(dir("b")) / kCheckpointFile));
}

TEST_F(RunDirTest, EvalIsDeterministicAndMatchesTraining) {
  const auto trained = run_train(tiny_config(), dir("run"));
  EvalRequest req;
  req.run_dir = dir("run");
  const std::string t1 = run_eval(req);
  EXPECT_EQ(t1, run_eval(req));
  std::ostringstream acc;
  acc << "\naccuracy=" << std::fixed;
  acc.precision(6);
  acc << trained.test.accuracy << "\n";
  EXPECT_NE(t1.find(acc.str()), std::string::npos) << t1;
  req.gate_mode = GateMode::sample;
  req.seed = 7;
  EXPECT_EQ(run_eval(req), run_eval(req));
}

TEST_F(RunDirTest, SoftCheckpointPrintsFullDensity) {
  RunConfig c = tiny_config();
  apply_setting(c, "attention=soft");
  run_train(c, dir("run"));
  EvalRequest req;
  req.run_dir = dir("run");
  const std::string out = run_eval(req);
  EXPECT_NE(out.find("\ndensity=1.000000\n"), std::string::npos) << out;
  EXPECT_NE(out.find("\nflops_ratio=1.000000\n"), std::string::npos) << out;
}

TEST_F(RunDirTest, VocabMismatchIsRejected) {
  run_train(tiny_config(), dir("run"));
  const fs::path vocab = fs::path(dir("run")) / kVocabFile;
  std::string text = slurp(vocab);
  text.erase(text.rfind('\n', text.size() - 2) + 1);
  std::ofstream(vocab, std::ios::binary) << text;
  EXPECT_THROW(load_run(dir("run")), ContractError);
}

TEST_F(RunDirTest, ExplainExportsNormalisedRecords) {
  run_train(tiny_config(), dir("run"));
  ExplainRequest req;
  req.run_dir = dir("run");
  req.text = "w3 w4 w5 unseen";
  std::string path;
  const auto records = run_explain(req, &path);
  ASSERT_EQ(records.size(), 1u);
  double s = 0.0;
  for (double a : records[0].alpha) s += a;
  EXPECT_NEAR(s, 1.0, 1e-9);
  EXPECT_EQ(read_json_lines(path), records);
  req.text = " \t ";
  EXPECT_THROW(run_explain(req), ConfigError);
  req.text.reset();
  req.slice_begin = 2;
  req.slice_end = 5;
  EXPECT_EQ(run_explain(req).size(), 3u);
}

TEST_F(RunDirTest, SweepRecordsFailuresAndMatchesSingleRuns) {
  const RunConfig c = tiny_config();
  const auto rows = run_sweep(c, "aux_variant", {"ffn", "bogus"}, dir("sweep"), 2);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_TRUE(rows[0].ok);
  EXPECT_FALSE(rows[1].ok);
  EXPECT_FALSE(rows[1].error.empty());
  RunConfig single = c;
  apply_setting(single, "aux_variant=ffn");
  const auto r = run_train(single, dir("single"));
  EXPECT_EQ(rows[0].test_accuracy, r.test.accuracy);
  EXPECT_EQ(rows[0].test_density, r.test.density);
  EXPECT_TRUE(fs::exists(fs::path(dir("sweep")) / "summary.tsv"));
  EXPECT_THROW(run_sweep(c, "hidden", {"4"}, dir("x")), ConfigError);
}

TEST_F(RunDirTest, SynthDataFilesMatchGenerator) {
  const RunConfig c = tiny_config();
  run_synth_data(c, dir("synth"));
  const auto train = read_dataset(dir("synth") + "/train.tsv", DatasetFormat::tsv_label_text);
  const auto generated = load_splits(c);
  EXPECT_EQ(train.size(), c.synth_train);
  EXPECT_EQ(generated.train.size() + generated.valid.size(), c.synth_train);
  EXPECT_EQ(read_dataset(dir("synth") + "/test.tsv", DatasetFormat::tsv_label_text)[0].tokens,
            generated.test[0].tokens);
}

#ifdef GATED_ATTN_CLI
int run_cli(const std::string& args) {
  const int status = std::system((std::string(GATED_ATTN_CLI) + " " + args + " > /dev/null 2>&1").c_str());
  return WEXITSTATUS(status);
}

TEST_F(RunDirTest, CliExitCodes) {
  const std::string cfg = dir("tiny.cfg");
  std::ofstream(cfg) << config_to_text(tiny_config());
  EXPECT_EQ(run_cli("train --config " + cfg + " --out " + dir("run")), 0);
  EXPECT_EQ(run_cli("train --config " + cfg + " --set nonsense=1 --out " + dir("x")), 1);
  EXPECT_EQ(run_cli("train --out"), 1);
  EXPECT_EQ(run_cli("frobnicate"), 1);
  EXPECT_EQ(run_cli("eval --run " + dir("run") + " --gate-mode sample --seed 7"), 0);
  EXPECT_EQ(run_cli("explain --run " + dir("run") + " --text ' '"), 1);
  fs::remove(fs::path(dir("run")) / kVocabFile);
  EXPECT_EQ(run_cli("eval --run " + dir("run")), 2);
}
#endif

}  // namespace
}  // namespace gatedattn
