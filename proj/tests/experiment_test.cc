// Copyright 2026 The gatedctr Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "gatedctr/experiment.h"

#include <sys/wait.h>

#include <cstdio>
#include <cmath>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "test_util.h"

namespace gatedctr {
namespace {

namespace fs = std::filesystem;

struct CliResult {
  int exit_code = -1;
  std::string output;  // stdout and stderr interleaved
};

CliResult RunCli(const std::string& args) {
  const std::string cmd = std::string(GATEDCTR_CLI_PATH) + " " + args + " 2>&1";
  CliResult r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (pipe == nullptr) return r;
  char buf[4096];
  std::size_t n;
  while ((n = fread(buf, 1, sizeof buf, pipe)) > 0) r.output.append(buf, n);
  const int status = pclose(pipe);
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string ReadFile(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void WriteFile(const fs::path& p, const std::string& text) {
  std::ofstream(p, std::ios::binary) << text;
}

GeneratorConfig TinyGenerator() {
  GeneratorConfig g;
  g.n_users = 300;
  g.n_items = 40;
  g.n_contexts = 3;
  g.n_clusters = 4;
  g.requests_per_user = 4;
  g.t_rt = 4;
  g.t_st = 8;
  g.t_lt = 12;
  g.noise_rate = 0.0;
  g.negatives_per_positive = 1;
  return g;
}

const char kTinyModel[] = R"({"dim": 8, "head_hidden": 16})";

TEST(ExperimentTest, MeanStdUsesSampleDeviation) {
  const std::vector<double> v = {1.0, 2.0, 3.0, 4.0};
  const auto [m, s] = MeanStd(v);
  EXPECT_DOUBLE_EQ(m, 2.5);
  EXPECT_NEAR(s, std::sqrt(5.0 / 3.0), 1e-15);
  EXPECT_EQ(MeanStd(std::vector<double>{7.0}).second, 0.0);
}

TEST(ExperimentTest, NoiseRateDirectories) {
  EXPECT_EQ(NoiseRateDirName(0.3), "rho_0.3");
  EXPECT_EQ(NoiseRateDirName(1.0), "rho_1");
  testing::TempDir dir("gen");
  GenDataRequest req;
  req.config = TinyGenerator();
  req.out = dir.path();
  req.noise_rates = {0.0, 0.5};
  std::ostringstream log;
  EXPECT_EQ(RunGenData(req, log).size(), 2u);
  const auto dirs = ExpandGlob((dir.path() / "rho_*").string());
  ASSERT_EQ(dirs.size(), 2u);
  EXPECT_EQ(LoadDataset(dirs[1]).noise_rate, 0.5);
}

TEST(ExperimentTest, LoadDatasetWithoutManifestInfersVocabulary) {
  testing::TempDir dir("nomanifest");
  const DatasetSplits s = SplitByRequest(Generate(TinyGenerator()));
  WriteJsonl(s.train, dir.path() / "train.jsonl");
  WriteJsonl(s.validation, dir.path() / "val.jsonl");
  WriteJsonl(s.test, dir.path() / "test.jsonl");
  const LoadedDataset ds = LoadDataset(dir.path());
  EXPECT_FALSE(ds.noise_rate.has_value());
  EXPECT_LE(ds.vocab.n_items, 40u);
  EXPECT_GT(ds.vocab.n_items, 30u);
}

TEST(ExperimentTest, AblationSweepRecordsEveryCell) {
  testing::TempDir dir("ablate");
  GenDataRequest gen;
  gen.config = TinyGenerator();
  gen.out = dir.path() / "data";
  gen.noise_rates = {0.0};
  std::ostringstream log;
  RunGenData(gen, log);

  fs::create_directories(dir.path() / "data" / "rho_broken");
  AblationRequest req;
  req.datasets = ExpandGlob((dir.path() / "data" / "rho_*").string());
  ASSERT_EQ(req.datasets.size(), 2u);
  req.variants = {"baseline", "full", "bogus-variant"};
  req.seeds = {1, 2};
  req.model_config = nlohmann::json::parse(kTinyModel);
  req.train.max_epochs = 1;
  req.out = dir.path() / "out";
  EXPECT_THROW(RunAblation(req, log), std::invalid_argument);
  req.variants = {"baseline", "full"};
  const AblationReport report = RunAblation(req, log);
  ASSERT_EQ(report.cells.size(), 8u);
  std::size_t failed = 0;
  for (const AblationCell& c : report.cells) {
    if (!c.ok) {
      ++failed;
      EXPECT_EQ(c.dataset, "rho_broken");
      EXPECT_FALSE(c.error.empty());
    }
  }
  EXPECT_EQ(failed, 4u);
  EXPECT_TRUE(fs::exists(req.out / "ablation_runs.jsonl"));
  EXPECT_TRUE(fs::exists(req.out / "ablation_table.jsonl"));
  EXPECT_NE(ReadFile(req.out / "ablation_table.txt").find("+-"), std::string::npos);
  bool saw_all = false, saw_rho = false;
  for (const AblationRow& r : report.rows) {
    saw_all |= r.group == "all";
    saw_rho |= r.group == "rho=0";
  }
  EXPECT_TRUE(saw_all);
  EXPECT_TRUE(saw_rho);
}

TEST(ExperimentTest, AblationRequestValidation) {
  AblationRequest req;
  EXPECT_ANY_THROW(req.Validate());
  req.datasets = {"x"};
  EXPECT_ANY_THROW(req.Validate());
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = std::make_unique<testing::TempDir>("cli");
    WriteFile(dir_->path() / "gen.json",
              GeneratorConfigToJson(TinyGenerator()).dump());
    WriteFile(dir_->path() / "model.json", kTinyModel);
  }
  fs::path Path(const std::string& name) const { return dir_->path() / name; }
  std::string Q(const std::string& name) const { return "'" + Path(name).string() + "'"; }

  std::unique_ptr<testing::TempDir> dir_;
};

TEST_F(CliTest, UsageErrorsExitOne) {
  EXPECT_EQ(RunCli("").exit_code, 1);
  EXPECT_EQ(RunCli("frobnicate").exit_code, 1);
  EXPECT_EQ(RunCli("train --out " + Q("o")).exit_code, 1);
  const CliResult typo = RunCli("grad-check --ablation +asgaa");
  EXPECT_EQ(typo.exit_code, 1);
  EXPECT_NE(typo.output.find("baseline"), std::string::npos) << typo.output;
  EXPECT_NE(typo.output.find("+cgdf"), std::string::npos);
  WriteFile(Path("bad_model.json"), R"({"dimm": 8})");
  const CliResult bad_key = RunCli("grad-check --model-config " + Q("bad_model.json"));
  EXPECT_EQ(bad_key.exit_code, 1);
  EXPECT_NE(bad_key.output.find("dimm"), std::string::npos) << bad_key.output;
}

TEST_F(CliTest, DataErrorsExitTwo) {
  EXPECT_EQ(RunCli("train --data " + Q("missing") + " --out " + Q("o")).exit_code, 2);
  WriteFile(Path("preds.jsonl"), "{\"request_id\": 1}\n");
  const CliResult r = RunCli("eval --predictions " + Q("preds.jsonl"));
  EXPECT_EQ(r.exit_code, 2);
  EXPECT_NE(r.output.find(":1"), std::string::npos) << r.output;
}

TEST_F(CliTest, GradCheckPassesAndFailureExitsThree) {
  const CliResult ok = RunCli("grad-check --model-config " + Q("model.json") +
                              " --max-entries 4");
  EXPECT_EQ(ok.exit_code, 0) << ok.output;
  EXPECT_NE(ok.output.find("parameter paths pass"), std::string::npos);
  const CliResult fail = RunCli("grad-check --model-config " + Q("model.json") +
                                " --max-entries 2 --tolerance 1e-300");
  EXPECT_EQ(fail.exit_code, 3) << fail.output;
}

TEST_F(CliTest, GenTrainEvalPipeline) {
  ASSERT_EQ(RunCli("gen-data --config " + Q("gen.json") + " --out " + Q("data")).exit_code, 0);
  EXPECT_TRUE(fs::exists(Path("data") / "manifest.json"));

  // Zero epochs: the checkpoint holds the seeded initialization.
  ASSERT_EQ(RunCli("train --data " + Q("data") + " --model-config " + Q("model.json") +
                   " --max-epochs 0 --seed 5 --out " + Q("init")).exit_code, 0);
  const Checkpoint init = LoadCheckpoint(Path("init") / "checkpoint.json");
  const ModelParams fresh = ModelParams::Initialize(
      init.params.config, FusionContext::kPurified, 5);
  const auto a = init.params.NamedParams(), b = fresh.NamedParams();
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(testing::MaxAbsDiff(a[i].second.data(), b[i].second.data()), 0.0);
  }

  const CliResult train = RunCli("train --data " + Q("data") + " --model-config " +
                                 Q("model.json") + " --ablation baseline --max-epochs 3 --out " +
                                 Q("run"));
  ASSERT_EQ(train.exit_code, 0) << train.output;
  const auto history = ReadHistory(Path("run") / "history.jsonl");
  ASSERT_FALSE(history.empty());
  double best_val = 0;
  for (const auto& e : history) best_val = std::max(best_val, e.val_auc);

  const CliResult eval = RunCli("eval --checkpoint " + Q("run/checkpoint.json") +
                                " --data " + Q("data") + " --json --out " + Q("eval"));
  ASSERT_EQ(eval.exit_code, 0) << eval.output;
  const auto report = nlohmann::json::parse(ReadFile(Path("eval") / "metrics.json"));
  EXPECT_GE(report.at("auc").get<double>(), best_val - 0.02);
  EXPECT_TRUE(fs::exists(Path("eval") / "predictions.jsonl"));

  // Re-evaluating the written predictions reproduces the report.
  const CliResult again = RunCli("eval --predictions " + Q("eval/predictions.jsonl") +
                                 " --out " + Q("eval2"));
  ASSERT_EQ(again.exit_code, 0) << again.output;
  EXPECT_EQ(ReadFile(Path("eval") / "metrics.json"), ReadFile(Path("eval2") / "metrics.json"));
}

TEST_F(CliTest, AblateThroughGlob) {
  ASSERT_EQ(RunCli("gen-data --config " + Q("gen.json") + " --noise-rates 0,1 --out " +
                   Q("sweep")).exit_code, 0);
  const CliResult r = RunCli("ablate --data-glob " + Q("sweep/rho_*") +
                             " --seeds 1 --variants baseline,+gcqc --max-epochs 1 "
                             "--model-config " + Q("model.json") + " --out " + Q("ab"));
  ASSERT_EQ(r.exit_code, 0) << r.output;
  std::ifstream in(Path("ab") / "ablation_runs.jsonl");
  std::size_t lines = 0;
  for (std::string line; std::getline(in, line);) ++lines;
  EXPECT_EQ(lines, 4u);
  EXPECT_EQ(RunCli("ablate --data-glob " + Q("nothing_*") + " --seeds 1 --out " + Q("ab2"))
                .exit_code,
            2);
}

}  // namespace
}  // namespace gatedctr
