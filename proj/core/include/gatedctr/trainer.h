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

// Mini-batch training with Adam, global-norm clipping and early stopping on
// validation AUC.

#ifndef GATEDCTR_TRAINER_H_
#define GATEDCTR_TRAINER_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

#include <nlohmann/json.hpp>

#include "gatedctr/data.h"
#include "gatedctr/layers.h"
#include "gatedctr/model.h"

namespace gatedctr {

// A parameter or the loss went non-finite.
class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrainConfig {
  double learning_rate = 1e-3;
  std::size_t batch_size = 128;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::size_t max_epochs = 10;
  std::size_t patience = 3;
  // <= 0 disables clipping.
  double clip_norm = 5.0;
  std::uint64_t seed = 1;

  void Validate() const;
};

TrainConfig TrainConfigFromJson(const nlohmann::json& json);
nlohmann::json TrainConfigToJson(const TrainConfig& config);

struct AdamState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  std::uint64_t t = 0;

  static AdamState ForParams(const ParamList& params);
};

// One bias-corrected Adam update, in place. grads[i] pairs with params[i].
void AdamStep(AdamState& state, const ParamList& params,
              std::span<const std::vector<double>> grads,
              const TrainConfig& config);

// Scales grads so their joint L2 norm is at most max_norm. Returns the norm
// before scaling.
double ClipGlobalNorm(std::vector<std::vector<double>>& grads, double max_norm);

// Mean BCE loss of one batch and the gradient of every parameter.
struct BatchGradients {
  double loss = 0.0;
  std::vector<std::vector<double>> grads;
};
BatchGradients ComputeGradients(const ModelParams& params,
                                const ParamList& named,
                                const AblationConfig& ablation,
                                const Batch& batch);

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_auc = 0.0;
};

nlohmann::json EpochRecordToJson(const EpochRecord& record);

struct TrainResult {
  ModelParams params;  // best by validation AUC
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;  // 0 when no epoch ran
  double best_val_auc = 0.0;
};

TrainResult Train(const ModelConfig& model_config,
                  const AblationConfig& ablation,
                  std::span<const Instance> train_data,
                  std::span<const Instance> val_data,
                  const TrainConfig& config,
                  const std::function<void(const EpochRecord&)>& on_epoch = {});

void WriteHistory(std::span<const EpochRecord> history,
                  const std::filesystem::path& path);
std::vector<EpochRecord> ReadHistory(const std::filesystem::path& path);

}  // namespace gatedctr

#endif  // GATEDCTR_TRAINER_H_
