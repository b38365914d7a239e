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

// Slow statistical properties of the generator and trainer.

#include <vector>

#include <gtest/gtest.h>

#include "gatedctr/data.h"
#include "gatedctr/experiment.h"
#include "gatedctr/metrics.h"
#include "gatedctr/model.h"
#include "gatedctr/trainer.h"

namespace gatedctr {
namespace {

double BaselineTestAuc(double noise_rate, std::uint64_t seed) {
  GeneratorConfig g;
  g.n_users = 300;
  g.n_items = 40;
  g.requests_per_user = 10;
  g.noise_rate = noise_rate;
  g.seed = seed;
  const DatasetSplits s = SplitByRequest(Generate(g));
  ModelConfig cfg;
  cfg.vocab = g.vocabulary();
  TrainConfig train;
  train.seed = seed;
  train.max_epochs = 8;
  const AblationConfig base = AblationPreset("baseline");
  const TrainResult r = Train(cfg, base, s.train, s.validation, train);
  std::vector<int> labels;
  for (const Instance& x : s.test) labels.push_back(x.label);
  return GlobalAuc(Predict(r.params, base, s.test), labels);
}

TEST(NoiseTest, BaselineAucDropsWithNoise) {
  std::vector<double> clean, noisy;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    clean.push_back(BaselineTestAuc(0.0, seed));
    noisy.push_back(BaselineTestAuc(0.5, seed));
  }
  const double mean_clean = MeanStd(clean).first;
  const double mean_noisy = MeanStd(noisy).first;
  RecordProperty("mean_auc_rho0", std::to_string(mean_clean));
  RecordProperty("mean_auc_rho05", std::to_string(mean_noisy));
  EXPECT_LT(mean_noisy, mean_clean);
}

}  // namespace
}  // namespace gatedctr
