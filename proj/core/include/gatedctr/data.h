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

// Instance schema, line-delimited JSON ingestion and the synthetic
// multi-view behavior generator.

#ifndef GATEDCTR_DATA_H_
#define GATEDCTR_DATA_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace gatedctr {

// Malformed or inconsistent input data.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Instance {
  std::uint64_t request_id = 0;
  std::size_t user_id = 0;
  std::size_t context_id = 0;
  std::size_t target_item_id = 0;
  // Oldest first within each view.
  std::vector<std::size_t> seq_rt;
  std::vector<std::size_t> seq_st;
  std::vector<std::size_t> seq_lt;
  int label = 0;

  bool operator==(const Instance&) const = default;
};

struct Vocabulary {
  std::size_t n_users = 0;
  std::size_t n_items = 0;
  std::size_t n_contexts = 0;
};

// Throws DataError naming the first id outside the vocabulary.
void ValidateIds(std::span<const Instance> instances, const Vocabulary& vocab);

// ---------------------------------------------------------------------------
// Synthetic generator.
//
// Items are split into contiguous interest clusters. Every user has a habit
// cluster (long-term view) and a short-term cluster. Each request draws a
// session cluster: the short-term one, or with probability drift_prob a
// uniformly random cluster. The real-time view is drawn from the session
// cluster and each behavior is replaced by a uniform random item with
// probability noise_rate. The positive target comes from the session
// cluster; negatives come from outside it, so only the real-time view
// carries the label signal directly.

struct GeneratorConfig {
  std::size_t n_users = 2000;
  std::size_t n_items = 500;
  std::size_t n_contexts = 16;
  std::size_t n_clusters = 8;
  std::size_t requests_per_user = 2;
  std::size_t t_rt = 5;
  std::size_t t_st = 20;
  std::size_t t_lt = 50;
  double noise_rate = 0.3;
  double drift_prob = 0.2;
  std::size_t negatives_per_positive = 4;
  std::uint64_t seed = 1;

  // Throws DataError on an invalid or degenerate configuration.
  void Validate() const;
  Vocabulary vocabulary() const { return {n_users, n_items, n_contexts}; }
};

GeneratorConfig GeneratorConfigFromJson(const nlohmann::json& json);
nlohmann::json GeneratorConfigToJson(const GeneratorConfig& config);

std::size_t ClusterOfItem(std::size_t item, std::size_t n_items,
                          std::size_t n_clusters);

std::vector<Instance> Generate(const GeneratorConfig& config);

// ---------------------------------------------------------------------------
// Splits and files.

enum class Split { kTrain, kValidation, kTest };

// 80/10/10 by a hash of the request id; all instances of a request land in
// the same split.
Split SplitOfRequest(std::uint64_t request_id);

struct DatasetSplits {
  std::vector<Instance> train;
  std::vector<Instance> validation;
  std::vector<Instance> test;
};

DatasetSplits SplitByRequest(std::span<const Instance> instances);

nlohmann::ordered_json InstanceToJson(const Instance& instance);
// Throws DataError naming the missing or malformed field.
Instance InstanceFromJson(const nlohmann::json& json);

void WriteJsonl(std::span<const Instance> instances,
                const std::filesystem::path& path);
// Errors carry the 1-based line number. Blank lines are skipped.
std::vector<Instance> ReadJsonl(const std::filesystem::path& path);

// Lower-case hex SHA-256 of a file's bytes.
std::string Sha256File(const std::filesystem::path& path);

struct DatasetFiles {
  std::filesystem::path train;
  std::filesystem::path validation;
  std::filesystem::path test;
  std::filesystem::path manifest;
};

DatasetFiles DatasetFilesIn(const std::filesystem::path& dir);

// Generates, splits and writes train/val/test files plus manifest.json
// (config, counts, checksums). Returns the manifest.
nlohmann::json WriteGeneratedDataset(const GeneratorConfig& config,
                                     const std::filesystem::path& dir);

// Recomputes checksums and compares with the manifest.
void VerifyManifest(const std::filesystem::path& dir);

}  // namespace gatedctr

#endif  // GATEDCTR_DATA_H_
