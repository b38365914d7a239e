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

// End-to-end experiment drivers behind the command-line tool: dataset
// generation, training, evaluation, gradient checking and ablation sweeps.
// Every output file is a pure function of the inputs; progress goes to the
// supplied log stream only.

#ifndef GATEDCTR_EXPERIMENT_H_
#define GATEDCTR_EXPERIMENT_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "gatedctr/checkpoint.h"
#include "gatedctr/data.h"
#include "gatedctr/gradcheck.h"
#include "gatedctr/metrics.h"
#include "gatedctr/model.h"
#include "gatedctr/trainer.h"

namespace gatedctr {

enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,
  kExitData = 2,
  kExitCheckFailed = 3,
};

// Bad flags or flag combinations.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// --- datasets --------------------------------------------------------------

struct LoadedDataset {
  std::filesystem::path dir;
  DatasetSplits splits;
  Vocabulary vocab;
  // Generator noise rate from the manifest, when there is one.
  std::optional<double> noise_rate;
};

// Reads train/val/test from dir. With a manifest the checksums are verified
// and the vocabulary comes from the generator config; without one it is
// inferred as max id + 1 over all splits.
LoadedDataset LoadDataset(const std::filesystem::path& dir);

// Instances of a single file, or of <dir>/<split>.jsonl for a directory.
std::vector<Instance> LoadInstances(const std::filesystem::path& path,
                                    Split split = Split::kTest);
Split ParseSplit(const std::string& name);

// Directories matching a shell glob, sorted.
std::vector<std::filesystem::path> ExpandGlob(const std::string& pattern);

// --- gen-data --------------------------------------------------------------

struct GenDataRequest {
  GeneratorConfig config;
  std::filesystem::path out;
  // Empty: one dataset in out. Otherwise one "rho_<value>" subdirectory per
  // noise rate, all sharing the remaining config.
  std::vector<double> noise_rates;
};

// Returns the manifests written.
std::vector<nlohmann::json> RunGenData(const GenDataRequest& request,
                                       std::ostream& log);

std::string NoiseRateDirName(double noise_rate);

// --- train -----------------------------------------------------------------

struct TrainRequest {
  std::filesystem::path data;
  // Absent fields keep their defaults; a "vocab" object overrides the one
  // derived from the dataset.
  nlohmann::json model_config = nlohmann::json::object();
  AblationConfig ablation;
  TrainConfig train;
  std::filesystem::path out;
};

struct TrainOutcome {
  TrainResult result;
  ModelConfig model_config;
};

// Writes <out>/checkpoint.json, <out>/history.jsonl and <out>/config.json.
TrainOutcome RunTrain(const TrainRequest& request, std::ostream& log);

// --- eval ------------------------------------------------------------------

std::vector<Prediction> ScoreInstances(const Checkpoint& checkpoint,
                                       std::span<const Instance> instances);

// --- grad-check ------------------------------------------------------------

struct GradCheckRequest {
  nlohmann::json model_config = nlohmann::json::object();
  AblationConfig ablation;  // the full model by default
  std::uint64_t seed = 1;
  GradCheckOptions options;
};

struct GradCheckReport {
  std::vector<TensorCheckResult> results;
  std::size_t scalars_checked = 0;
  double max_relative_error = 0.0;
  bool passed = false;
};

// Vocabulary of the grad-check model unless the config carries one.
Vocabulary GradCheckVocabulary();

// Builds the model and a 2-instance batch from the seed and compares the
// backward pass with central differences for every parameter path.
GradCheckReport RunGradCheck(const GradCheckRequest& request);

// --- ablate ----------------------------------------------------------------

struct AblationRequest {
  std::vector<std::filesystem::path> datasets;
  std::vector<std::string> variants = {"baseline", "+asga", "+gcqc", "+cgdf",
                                       "full"};
  std::vector<std::uint64_t> seeds;
  nlohmann::json model_config = nlohmann::json::object();
  TrainConfig train;
  std::size_t ndcg_k = 0;
  // Per-cell subdirectories plus the record files; empty keeps it in memory.
  std::filesystem::path out;

  void Validate() const;
};

struct AblationCell {
  std::string dataset;
  std::optional<double> noise_rate;
  std::string variant;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  MetricsReport test;
  std::size_t best_epoch = 0;
  double best_val_auc = 0.0;

  nlohmann::json ToJson() const;
};

struct AblationRow {
  std::string group;  // "all" or "rho=<value>"
  std::string variant;
  std::size_t runs = 0;
  std::size_t failures = 0;
  double auc_mean = 0.0, auc_std = 0.0;
  double ndcg_mean = 0.0, ndcg_std = 0.0;
  double map_mean = 0.0, map_std = 0.0;

  nlohmann::json ToJson() const;
};

struct AblationReport {
  std::vector<AblationCell> cells;
  std::vector<AblationRow> rows;

  std::string ToText() const;
};

// Cells are independent: a failing cell is recorded and the sweep goes on.
AblationReport RunAblation(const AblationRequest& request, std::ostream& log);

// Sample mean and standard deviation (n - 1 denominator; 0 for n < 2).
std::pair<double, double> MeanStd(std::span<const double> values);

}  // namespace gatedctr

#endif  // GATEDCTR_EXPERIMENT_H_
