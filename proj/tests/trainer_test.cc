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

#include "gatedctr/trainer.h"

#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "gatedctr/metrics.h"
#include "test_util.h"

namespace gatedctr {
namespace {

ParamList OneParam(std::vector<double> values) {
  const std::size_t n = values.size();
  return {{"w", Tensor::FromData({n}, std::move(values))}};
}

TEST(AdamTest, HandTraceOfTwoSteps) {
  TrainConfig cfg;
  cfg.learning_rate = 0.1;
  const ParamList p = OneParam({1.0, -2.0});
  AdamState s = AdamState::ForParams(p);
  std::vector<std::vector<double>> g = {{0.5, -3.0}};
  AdamStep(s, p, g, cfg);
  // Step 1: m_hat = g and v_hat = g^2, so the step is lr * g / (|g| + eps).
  EXPECT_NEAR(p[0].second.data()[0], 1.0 - 0.1 * 0.5 / (0.5 + 1e-8), 1e-15);
  EXPECT_NEAR(p[0].second.data()[1], -2.0 + 0.1 * 3.0 / (3.0 + 1e-8), 1e-15);
  g = {{-1.0, -3.0}};
  AdamStep(s, p, g, cfg);
  EXPECT_EQ(s.t, 2u);
  const double m = 0.9 * (0.1 * 0.5) + 0.1 * (-1.0);   // -0.055
  const double v = 0.999 * (0.001 * 0.25) + 0.001 * 1.0;  // 0.00124975
  const double m_hat = m / (1 - 0.81);
  const double v_hat = v / (1 - 0.998001);
  const double after_first = 1.0 - 0.1 * 0.5 / (0.5 + 1e-8);
  EXPECT_NEAR(p[0].second.data()[0],
              after_first - 0.1 * m_hat / (std::sqrt(v_hat) + 1e-8), 1e-14);
}

TEST(AdamTest, ZeroGradientLeavesParametersUnchanged) {
  const ParamList p = OneParam({0.3, -0.7, 2.0});
  AdamState s = AdamState::ForParams(p);
  const std::vector<std::vector<double>> g = {{0.0, 0.0, 0.0}};
  for (int i = 0; i < 5; ++i) AdamStep(s, p, g, TrainConfig{});
  EXPECT_EQ(p[0].second.data()[0], 0.3);
  EXPECT_EQ(p[0].second.data()[1], -0.7);
  EXPECT_EQ(p[0].second.data()[2], 2.0);
}

TEST(AdamTest, ShapeMismatchThrows) {
  const ParamList p = OneParam({1.0, 2.0});
  AdamState s = AdamState::ForParams(p);
  const std::vector<std::vector<double>> g = {{1.0}};
  EXPECT_THROW(AdamStep(s, p, g, TrainConfig{}), ShapeError);
  EXPECT_EQ(s.t, 0u);
}

TEST(ClipTest, ScalesToMaxNormOnlyWhenAbove) {
  std::vector<std::vector<double>> g = {{3.0}, {4.0}};
  EXPECT_DOUBLE_EQ(ClipGlobalNorm(g, 10.0), 5.0);
  EXPECT_EQ(g[0][0], 3.0);
  EXPECT_DOUBLE_EQ(ClipGlobalNorm(g, 1.0), 5.0);
  EXPECT_NEAR(g[0][0], 0.6, 1e-15);
  EXPECT_NEAR(g[1][0], 0.8, 1e-15);
}

TEST(TrainConfigTest, ValidationAndJson) {
  TrainConfig c;
  c.learning_rate = 0;
  EXPECT_ANY_THROW(c.Validate());
  c = TrainConfig{};
  c.beta2 = 1.0;
  EXPECT_ANY_THROW(c.Validate());
  c = TrainConfig{};
  c.max_epochs = 7;
  c.seed = 42;
  const TrainConfig back = TrainConfigFromJson(TrainConfigToJson(c));
  EXPECT_EQ(back.max_epochs, 7u);
  EXPECT_EQ(back.seed, 42u);
  EXPECT_ANY_THROW(TrainConfigFromJson(nlohmann::json{{"learning_rat", 0.1}}));
}

GeneratorConfig ToyGenerator() {
  GeneratorConfig g;
  g.n_users = 2000;
  g.n_items = 100;
  g.n_contexts = 4;
  g.n_clusters = 2;
  g.requests_per_user = 10;
  g.t_rt = 5;
  g.t_st = 10;
  g.t_lt = 20;
  g.noise_rate = 0.0;
  g.negatives_per_positive = 1;
  g.seed = 3;
  return g;
}

ModelConfig ModelFor(const GeneratorConfig& g) {
  ModelConfig m;
  m.vocab = g.vocabulary();
  m.dim = 8;
  return m;
}

TEST(TrainTest, SeparableToyReachesHighAuc) {
  const GeneratorConfig g = ToyGenerator();
  const DatasetSplits s = SplitByRequest(Generate(g));
  TrainConfig cfg;
  cfg.max_epochs = 4;
  const AblationConfig base = AblationPreset("baseline");
  const TrainResult r = Train(ModelFor(g), base, s.train, s.validation, cfg);
  ASSERT_FALSE(r.history.empty());
  EXPECT_LE(r.history[0].train_loss, std::log(2.0) + 0.05);
  const auto scores = Predict(r.params, base, s.test);
  std::vector<int> labels;
  for (const Instance& x : s.test) labels.push_back(x.label);
  EXPECT_GT(GlobalAuc(scores, labels), 0.95);
}

GeneratorConfig SmallGenerator(std::uint64_t seed) {
  GeneratorConfig g;
  g.n_users = 60;
  g.n_items = 40;
  g.n_contexts = 3;
  g.n_clusters = 4;
  g.requests_per_user = 3;
  g.t_rt = 4;
  g.t_st = 6;
  g.t_lt = 8;
  g.negatives_per_positive = 2;
  g.seed = seed;
  return g;
}

TEST(TrainTest, ZeroEpochsReturnsInitialization) {
  const GeneratorConfig g = SmallGenerator(1);
  const DatasetSplits s = SplitByRequest(Generate(g));
  TrainConfig cfg;
  cfg.max_epochs = 0;
  cfg.seed = 9;
  const TrainResult r = Train(ModelFor(g), AblationConfig{}, s.train, s.validation, cfg);
  EXPECT_TRUE(r.history.empty());
  EXPECT_EQ(r.best_epoch, 0u);
  const ModelParams init =
      ModelParams::Initialize(ModelFor(g), FusionContext::kPurified, 9);
  const auto a = r.params.NamedParams(), b = init.NamedParams();
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(testing::MaxAbsDiff(a[i].second.data(), b[i].second.data()), 0.0);
  }
}

TEST(TrainTest, DeterministicAndEarlyStopsWithinPatience) {
  const GeneratorConfig g = SmallGenerator(2);
  const DatasetSplits s = SplitByRequest(Generate(g));
  TrainConfig cfg;
  cfg.max_epochs = 8;
  cfg.patience = 2;
  cfg.batch_size = 16;
  std::size_t callbacks = 0;
  const TrainResult a = Train(ModelFor(g), AblationConfig{}, s.train,
                              s.validation, cfg,
                              [&](const EpochRecord&) { ++callbacks; });
  const TrainResult b = Train(ModelFor(g), AblationConfig{}, s.train,
                              s.validation, cfg);
  EXPECT_EQ(callbacks, a.history.size());
  ASSERT_EQ(a.history.size(), b.history.size());
  for (std::size_t i = 0; i < a.history.size(); ++i) {
    EXPECT_EQ(a.history[i].train_loss, b.history[i].train_loss);
    EXPECT_EQ(a.history[i].val_auc, b.history[i].val_auc);
  }
  EXPECT_LE(a.history.size(), a.best_epoch + cfg.patience);
  double best = 0;
  for (const auto& e : a.history) best = std::max(best, e.val_auc);
  EXPECT_EQ(a.best_val_auc, best);
  EXPECT_EQ(a.history[a.best_epoch - 1].val_auc, best);
  const auto scores = Predict(a.params, AblationConfig{}, s.validation);
  std::vector<int> labels;
  for (const Instance& x : s.validation) labels.push_back(x.label);
  EXPECT_EQ(GlobalAuc(scores, labels), a.best_val_auc);
}

TEST(TrainTest, SingleSmallStepDecreasesLoss) {
  const GeneratorConfig g = SmallGenerator(3);
  const auto xs = Generate(g);
  const std::vector<Instance> chunk(xs.begin(), xs.begin() + 32);
  TrainConfig cfg;
  cfg.learning_rate = 1e-4;
  int decreased = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const ModelParams p =
        ModelParams::Initialize(ModelFor(g), FusionContext::kPurified, seed);
    const ParamList named = p.NamedParams();
    for (const auto& [n, t] : named) Tensor(t).set_requires_grad(true);
    const Batch batch = MakeBatch(chunk, g.vocabulary());
    const BatchGradients before = ComputeGradients(p, named, AblationConfig{}, batch);
    AdamState adam = AdamState::ForParams(named);
    AdamStep(adam, named, before.grads, cfg);
    const double after = ComputeGradients(p, named, AblationConfig{}, batch).loss;
    if (after < before.loss) ++decreased;
  }
  EXPECT_GE(decreased, 19);
}

TEST(TrainTest, RejectsEmptyOrOutOfVocabularyData) {
  const GeneratorConfig g = SmallGenerator(4);
  auto xs = Generate(g);
  const std::vector<Instance> none;
  EXPECT_THROW(Train(ModelFor(g), AblationConfig{}, none, xs, TrainConfig{}), DataError);
  xs[0].target_item_id = 1000;
  EXPECT_THROW(Train(ModelFor(g), AblationConfig{}, xs, xs, TrainConfig{}), DataError);
}

TEST(HistoryTest, RoundTrip) {
  testing::TempDir dir("history");
  const std::vector<EpochRecord> h = {{1, 0.6931, 0.5}, {2, 0.5, 0.75}};
  WriteHistory(h, dir.path() / "h.jsonl");
  const auto back = ReadHistory(dir.path() / "h.jsonl");
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[1].epoch, 2u);
  EXPECT_EQ(back[0].train_loss, 0.6931);
  EXPECT_EQ(back[1].val_auc, 0.75);
}

}  // namespace
}  // namespace gatedctr
