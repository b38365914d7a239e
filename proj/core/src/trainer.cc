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

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <string>

#include "gatedctr/json_config.h"
#include "gatedctr/metrics.h"

namespace gatedctr {

void TrainConfig::Validate() const {
  if (!(learning_rate > 0.0)) {
    throw ConfigError("train config: learning_rate must be > 0");
  }
  if (!(beta1 > 0.0 && beta1 < 1.0)) {
    throw ConfigError("train config: beta1 must lie in (0, 1)");
  }
  if (!(beta2 > 0.0 && beta2 < 1.0)) {
    throw ConfigError("train config: beta2 must lie in (0, 1)");
  }
  if (!(eps > 0.0)) throw ConfigError("train config: eps must be > 0");
  if (batch_size == 0) throw ConfigError("train config: batch_size must be > 0");
}

TrainConfig TrainConfigFromJson(const nlohmann::json& json) {
  TrainConfig c;
  StrictObject o(json, "train config");
  o.Read("learning_rate", &c.learning_rate);
  o.Read("batch_size", &c.batch_size);
  o.Read("beta1", &c.beta1);
  o.Read("beta2", &c.beta2);
  o.Read("eps", &c.eps);
  o.Read("max_epochs", &c.max_epochs);
  o.Read("patience", &c.patience);
  o.Read("clip_norm", &c.clip_norm);
  std::size_t seed = c.seed;
  o.Read("seed", &seed);
  c.seed = seed;
  o.Finish();
  c.Validate();
  return c;
}

nlohmann::json TrainConfigToJson(const TrainConfig& c) {
  nlohmann::ordered_json j;
  j["learning_rate"] = c.learning_rate;
  j["batch_size"] = c.batch_size;
  j["beta1"] = c.beta1;
  j["beta2"] = c.beta2;
  j["eps"] = c.eps;
  j["max_epochs"] = c.max_epochs;
  j["patience"] = c.patience;
  j["clip_norm"] = c.clip_norm;
  j["seed"] = c.seed;
  return j;
}

AdamState AdamState::ForParams(const ParamList& params) {
  AdamState s;
  for (const auto& [path, t] : params) {
    s.m.emplace_back(t.size(), 0.0);
    s.v.emplace_back(t.size(), 0.0);
  }
  return s;
}

void AdamStep(AdamState& state, const ParamList& params,
              std::span<const std::vector<double>> grads,
              const TrainConfig& config) {
  if (grads.size() != params.size() || state.m.size() != params.size() ||
      state.v.size() != params.size()) {
    throw ShapeError("AdamStep: " + std::to_string(params.size()) +
                     " params, " + std::to_string(grads.size()) + " grads, " +
                     std::to_string(state.m.size()) + " moment buffers");
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    const std::size_t n = params[k].second.size();
    if (grads[k].size() != n || state.m[k].size() != n ||
        state.v[k].size() != n) {
      throw ShapeError("AdamStep: size mismatch for '" + params[k].first + "'");
    }
  }

  ++state.t;
  const double t = static_cast<double>(state.t);
  const double correction1 = 1.0 - std::pow(config.beta1, t);
  const double correction2 = 1.0 - std::pow(config.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor p = params[k].second;
    auto values = p.mutable_data();
    auto& m = state.m[k];
    auto& v = state.v[k];
    const auto& g = grads[k];
    for (std::size_t i = 0; i < values.size(); ++i) {
      m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * g[i];
      v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * g[i] * g[i];
      const double m_hat = m[i] / correction1;
      const double v_hat = v[i] / correction2;
      values[i] -= config.learning_rate * m_hat / (std::sqrt(v_hat) + config.eps);
    }
  }
}

double ClipGlobalNorm(std::vector<std::vector<double>>& grads, double max_norm) {
  double sq = 0.0;
  for (const auto& g : grads) {
    for (double x : g) sq += x * x;
  }
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double scale = max_norm / norm;
    for (auto& g : grads) {
      for (double& x : g) x *= scale;
    }
  }
  return norm;
}

BatchGradients ComputeGradients(const ModelParams& params,
                                const ParamList& named,
                                const AblationConfig& ablation,
                                const Batch& batch) {
  for (const auto& [path, t] : named) Tensor(t).ZeroGrad();
  BatchGradients out;
  Tape tape;
  const ForwardResult fwd = Forward(params, ablation, batch);
  const Tensor loss = BinaryCrossEntropy(fwd.probabilities, batch.labels);
  tape.Backward(loss);
  out.loss = loss.item();
  out.grads.reserve(named.size());
  for (const auto& [path, t] : named) out.grads.push_back(t.grad());
  return out;
}

nlohmann::json EpochRecordToJson(const EpochRecord& r) {
  nlohmann::ordered_json j;
  j["epoch"] = r.epoch;
  j["train_loss"] = r.train_loss;
  j["val_auc"] = r.val_auc;
  return j;
}

namespace {

void RequireFinite(const ParamList& params, std::size_t epoch) {
  for (const auto& [path, t] : params) {
    for (double x : t.data()) {
      if (!std::isfinite(x)) {
        throw TrainingError("parameter '" + path +
                            "' became non-finite in epoch " +
                            std::to_string(epoch));
      }
    }
  }
}

double ValidationAuc(const ModelParams& params, const AblationConfig& ablation,
                     std::span<const Instance> val_data) {
  const std::vector<double> scores = Predict(params, ablation, val_data);
  std::vector<int> labels;
  labels.reserve(val_data.size());
  for (const Instance& x : val_data) labels.push_back(x.label);
  try {
    return GlobalAuc(scores, labels);
  } catch (const MetricError& e) {
    throw DataError(std::string("validation set: ") + e.what());
  }
}

}  // namespace

TrainResult Train(const ModelConfig& model_config,
                  const AblationConfig& ablation,
                  std::span<const Instance> train_data,
                  std::span<const Instance> val_data,
                  const TrainConfig& config,
                  const std::function<void(const EpochRecord&)>& on_epoch) {
  config.Validate();
  model_config.Validate();
  if (train_data.empty()) throw DataError("training set is empty");
  if (val_data.empty()) throw DataError("validation set is empty");
  ValidateIds(train_data, model_config.vocab);
  ValidateIds(val_data, model_config.vocab);

  ModelParams params = ModelParams::Initialize(
      model_config, ablation.fusion_context, config.seed);
  TrainResult result{params.Clone(), {}, 0, 0.0};
  if (config.max_epochs == 0) return result;

  const ParamList named = params.NamedParams();
  for (const auto& [path, t] : named) Tensor(t).set_requires_grad(true);
  AdamState adam = AdamState::ForParams(named);

  // A separate stream from initialization so the two seeds never alias.
  std::mt19937_64 shuffle_rng(config.seed ^ 0x5DEECE66DULL);
  std::vector<std::size_t> order(train_data.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<Instance> chunk;
  chunk.reserve(config.batch_size);

  std::size_t since_best = 0;
  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size();
         start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      chunk.clear();
      for (std::size_t i = start; i < end; ++i) {
        chunk.push_back(train_data[order[i]]);
      }
      const Batch batch = MakeBatch(chunk, model_config.vocab);
      BatchGradients step = ComputeGradients(params, named, ablation, batch);
      if (!std::isfinite(step.loss)) {
        throw TrainingError("loss became non-finite in epoch " +
                            std::to_string(epoch));
      }
      loss_sum += step.loss * static_cast<double>(chunk.size());
      ClipGlobalNorm(step.grads, config.clip_norm);
      AdamStep(adam, named, step.grads, config);
      RequireFinite(named, epoch);
    }
    for (const auto& [path, t] : named) Tensor(t).ZeroGrad();

    EpochRecord record;
    record.epoch = epoch;
    record.train_loss = loss_sum / static_cast<double>(train_data.size());
    record.val_auc = ValidationAuc(params, ablation, val_data);
    result.history.push_back(record);
    if (on_epoch) on_epoch(record);

    if (result.best_epoch == 0 || record.val_auc > result.best_val_auc) {
      result.best_epoch = epoch;
      result.best_val_auc = record.val_auc;
      result.params = params.Clone();
      since_best = 0;
    } else if (++since_best >= config.patience) {
      break;
    }
  }
  for (const auto& [path, t] : result.params.NamedParams()) {
    Tensor(t).set_requires_grad(false);
  }
  return result;
}

void WriteHistory(std::span<const EpochRecord> history,
                  const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  for (const EpochRecord& r : history) out << EpochRecordToJson(r).dump() << '\n';
}

std::vector<EpochRecord> ReadHistory(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<EpochRecord> history;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      EpochRecord r;
      r.epoch = j.at("epoch").get<std::size_t>();
      r.train_loss = j.at("train_loss").get<double>();
      r.val_auc = j.at("val_auc").get<double>();
      history.push_back(r);
    } catch (const nlohmann::json::exception& e) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": " +
                      e.what());
    }
  }
  return history;
}

}  // namespace gatedctr
