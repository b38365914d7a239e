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

// Ranking metrics over scored requests.
//
// Tie conventions:
//  * AUC counts a positive/negative pair only when the positive scores
//    strictly higher; tied pairs contribute 0.
//  * NDCG and AP rank by descending score and break ties by original
//    position, earlier first.

#ifndef GATEDCTR_METRICS_H_
#define GATEDCTR_METRICS_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace gatedctr {

// A metric is undefined for its input (e.g. AUC with one class only).
class MetricError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

struct RequestGroup {
  std::uint64_t request_id = 0;
  std::vector<double> scores;
  std::vector<int> labels;
};

struct Prediction {
  std::uint64_t request_id = 0;
  double score = 0.0;
  int label = 0;
};

// Fraction of (positive, negative) pairs with score(pos) > score(neg), over
// all pairs in the input. O(n log n).
double GlobalAuc(std::span<const double> scores, std::span<const int> labels);

// Indices ordered by descending score, ties by ascending index.
std::vector<std::size_t> RankOrder(std::span<const double> scores);

// k == 0 means the whole group. Requires at least one positive.
double NdcgAtK(const RequestGroup& group, std::size_t k = 0);

// Average precision over the full ranked list. Requires at least one
// positive.
double AveragePrecision(const RequestGroup& group);

// Groups in order of first appearance.
std::vector<RequestGroup> GroupByRequest(std::span<const Prediction> rows);

struct MetricsReport {
  std::size_t instances = 0;
  std::size_t groups = 0;
  // Groups without a positive are left out of NDCG and MAP.
  std::size_t skipped_groups = 0;
  std::size_t ndcg_k = 0;  // 0 = full list
  double auc = 0.0;
  double ndcg = 0.0;
  double map = 0.0;
  double logloss = 0.0;

  nlohmann::json ToJson() const;
  std::string ToText() const;
  bool operator==(const MetricsReport&) const = default;
};

MetricsReport Evaluate(std::span<const Prediction> rows, std::size_t ndcg_k = 0);

// Line-delimited {"request_id", "score", "label"} records.
void WritePredictions(std::span<const Prediction> rows,
                      const std::filesystem::path& path);
std::vector<Prediction> ReadPredictions(const std::filesystem::path& path);

}  // namespace gatedctr

#endif  // GATEDCTR_METRICS_H_
