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

#include "gatedctr/metrics.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include "gatedctr/data.h"

namespace gatedctr {
namespace {

std::size_t CountPositives(const RequestGroup& group) {
  return static_cast<std::size_t>(
      std::count(group.labels.begin(), group.labels.end(), 1));
}

void CheckGroup(const RequestGroup& group) {
  if (group.scores.size() != group.labels.size()) {
    throw std::invalid_argument("request group has " +
                                std::to_string(group.scores.size()) +
                                " scores but " +
                                std::to_string(group.labels.size()) +
                                " labels");
  }
  if (CountPositives(group) == 0) {
    throw MetricError("request " + std::to_string(group.request_id) +
                      " has no positive");
  }
}

}  // namespace

double GlobalAuc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) {
    throw std::invalid_argument("GlobalAuc: scores and labels differ in size");
  }
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Walk tie blocks in ascending score; each positive beats every negative
  // in earlier blocks.
  std::uint64_t negatives_below = 0;
  std::uint64_t wins = 0;
  std::uint64_t positives = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    std::uint64_t block_pos = 0, block_neg = 0;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      (labels[order[j]] == 1 ? block_pos : block_neg) += 1;
      ++j;
    }
    wins += block_pos * negatives_below;
    negatives_below += block_neg;
    positives += block_pos;
    i = j;
  }
  if (positives == 0 || negatives_below == 0) {
    throw MetricError("AUC undefined: need both positive and negative labels");
  }
  return static_cast<double>(wins) /
         (static_cast<double>(positives) * static_cast<double>(negatives_below));
}

std::vector<std::size_t> RankOrder(std::span<const double> scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] > scores[b];
  });
  return order;
}

double NdcgAtK(const RequestGroup& group, std::size_t k) {
  CheckGroup(group);
  const std::size_t n = group.scores.size();
  const std::size_t cutoff = k == 0 ? n : std::min(k, n);
  const std::vector<std::size_t> order = RankOrder(group.scores);
  double dcg = 0.0;
  for (std::size_t rank = 0; rank < cutoff; ++rank) {
    if (group.labels[order[rank]] == 1) dcg += 1.0 / std::log2(rank + 2.0);
  }
  const std::size_t ideal_hits = std::min(CountPositives(group), cutoff);
  double idcg = 0.0;
  for (std::size_t rank = 0; rank < ideal_hits; ++rank) {
    idcg += 1.0 / std::log2(rank + 2.0);
  }
  return dcg / idcg;
}

double AveragePrecision(const RequestGroup& group) {
  CheckGroup(group);
  const std::vector<std::size_t> order = RankOrder(group.scores);
  std::size_t hits = 0;
  double total = 0.0;
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    if (group.labels[order[rank]] == 1) {
      ++hits;
      total += static_cast<double>(hits) / static_cast<double>(rank + 1);
    }
  }
  return total / static_cast<double>(CountPositives(group));
}

std::vector<RequestGroup> GroupByRequest(std::span<const Prediction> rows) {
  std::vector<RequestGroup> groups;
  std::unordered_map<std::uint64_t, std::size_t> index;
  for (const Prediction& p : rows) {
    auto [it, inserted] = index.try_emplace(p.request_id, groups.size());
    if (inserted) groups.push_back({p.request_id, {}, {}});
    RequestGroup& g = groups[it->second];
    g.scores.push_back(p.score);
    g.labels.push_back(p.label);
  }
  return groups;
}

MetricsReport Evaluate(std::span<const Prediction> rows, std::size_t ndcg_k) {
  MetricsReport report;
  report.instances = rows.size();
  report.ndcg_k = ndcg_k;
  std::vector<double> scores;
  std::vector<int> labels;
  double logloss = 0.0;
  for (const Prediction& p : rows) {
    scores.push_back(p.score);
    labels.push_back(p.label);
    const double clamped = std::clamp(p.score, 1e-7, 1.0 - 1e-7);
    logloss -= p.label == 1 ? std::log(clamped) : std::log(1.0 - clamped);
  }
  report.auc = GlobalAuc(scores, labels);
  report.logloss = rows.empty() ? 0.0 : logloss / rows.size();

  const std::vector<RequestGroup> groups = GroupByRequest(rows);
  report.groups = groups.size();
  double ndcg = 0.0, map = 0.0;
  std::size_t used = 0;
  for (const RequestGroup& g : groups) {
    if (CountPositives(g) == 0) {
      ++report.skipped_groups;
      continue;
    }
    ndcg += NdcgAtK(g, ndcg_k);
    map += AveragePrecision(g);
    ++used;
  }
  if (used > 0) {
    report.ndcg = ndcg / used;
    report.map = map / used;
  }
  return report;
}

nlohmann::json MetricsReport::ToJson() const {
  nlohmann::ordered_json j;
  j["auc"] = auc;
  j["ndcg"] = ndcg;
  j["ndcg_k"] = ndcg_k;
  j["map"] = map;
  j["logloss"] = logloss;
  j["instances"] = instances;
  j["groups"] = groups;
  j["skipped_groups"] = skipped_groups;
  return j;
}

std::string MetricsReport::ToText() const {
  std::ostringstream os;
  os.precision(6);
  os << std::fixed;
  os << "AUC      " << auc << "\n";
  os << "NDCG" << (ndcg_k == 0 ? std::string("    ")
                               : "@" + std::to_string(ndcg_k) + "  ")
     << ndcg << "\n";
  os << "MAP      " << map << "\n";
  os << "LogLoss  " << logloss << "\n";
  os << "instances " << instances << ", groups " << groups << " ("
     << skipped_groups << " without positives skipped)\n";
  return os.str();
}

void WritePredictions(std::span<const Prediction> rows,
                      const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  for (const Prediction& p : rows) {
    nlohmann::ordered_json j;
    j["request_id"] = p.request_id;
    j["score"] = p.score;
    j["label"] = p.label;
    out << j.dump() << '\n';
  }
}

std::vector<Prediction> ReadPredictions(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<Prediction> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = path.string() + ":" + std::to_string(line_no);
    try {
      const auto j = nlohmann::json::parse(line);
      for (const char* field : {"request_id", "score", "label"}) {
        if (!j.contains(field)) {
          throw DataError(where + ": missing field '" + field + "'");
        }
      }
      Prediction p;
      p.request_id = j.at("request_id").get<std::uint64_t>();
      p.score = j.at("score").get<double>();
      p.label = j.at("label").get<int>();
      if (p.label != 0 && p.label != 1) {
        throw DataError(where + ": field 'label' must be 0 or 1");
      }
      rows.push_back(p);
    } catch (const nlohmann::json::exception& e) {
      throw DataError(where + ": " + e.what());
    }
  }
  return rows;
}

}  // namespace gatedctr
