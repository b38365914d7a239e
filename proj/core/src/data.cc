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

#include "gatedctr/data.h"

#include <openssl/evp.h>

#include <algorithm>
#include <array>
#include <fstream>
#include <iomanip>
#include <memory>
#include <random>
#include <sstream>

#include "gatedctr/json_config.h"

namespace gatedctr {
namespace {

const char* const kFields[] = {"request_id",     "user_id", "context_id",
                               "target_item_id", "seq_rt",  "seq_st",
                               "seq_lt",         "label"};

std::uint64_t SplitMix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

struct ClusterRange {
  std::size_t begin;
  std::size_t end;
};

ClusterRange RangeOfCluster(std::size_t cluster, std::size_t n_items,
                            std::size_t n_clusters) {
  const std::size_t width = n_items / n_clusters;
  const std::size_t begin = cluster * width;
  const std::size_t end = cluster + 1 == n_clusters ? n_items : begin + width;
  return {begin, end};
}

std::size_t UniformIndex(std::mt19937_64& rng, std::size_t n) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

bool Bernoulli(std::mt19937_64& rng, double p) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng) < p;
}

std::size_t CheckedId(const nlohmann::json& json, const char* field) {
  const auto& v = json.at(field);
  if (!v.is_number_integer() || v.get<std::int64_t>() < 0) {
    throw DataError(std::string("field '") + field +
                    "' must be a non-negative integer");
  }
  return v.get<std::size_t>();
}

std::vector<std::size_t> CheckedSequence(const nlohmann::json& json,
                                         const char* field) {
  const auto& v = json.at(field);
  if (!v.is_array()) {
    throw DataError(std::string("field '") + field + "' must be an array");
  }
  std::vector<std::size_t> out;
  out.reserve(v.size());
  for (const auto& e : v) {
    if (!e.is_number_integer() || e.get<std::int64_t>() < 0) {
      throw DataError(std::string("field '") + field +
                      "' must hold non-negative integers");
    }
    out.push_back(e.get<std::size_t>());
  }
  return out;
}

}  // namespace

void ValidateIds(std::span<const Instance> instances, const Vocabulary& vocab) {
  auto fail = [](std::size_t index, const char* field, std::size_t id,
                 std::size_t size) {
    throw DataError("instance " + std::to_string(index) + ": " + field + " " +
                    std::to_string(id) + " outside vocabulary of size " +
                    std::to_string(size));
  };
  for (std::size_t i = 0; i < instances.size(); ++i) {
    const Instance& x = instances[i];
    if (x.user_id >= vocab.n_users) fail(i, "user_id", x.user_id, vocab.n_users);
    if (x.context_id >= vocab.n_contexts) {
      fail(i, "context_id", x.context_id, vocab.n_contexts);
    }
    if (x.target_item_id >= vocab.n_items) {
      fail(i, "target_item_id", x.target_item_id, vocab.n_items);
    }
    for (auto [seq, name] : {std::pair{&x.seq_rt, "seq_rt"},
                             std::pair{&x.seq_st, "seq_st"},
                             std::pair{&x.seq_lt, "seq_lt"}}) {
      for (std::size_t id : *seq) {
        if (id >= vocab.n_items) fail(i, name, id, vocab.n_items);
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Generator

void GeneratorConfig::Validate() const {
  auto require = [](bool ok, const std::string& message) {
    if (!ok) throw DataError("generator config: " + message);
  };
  require(n_users > 0 && n_items > 0 && n_contexts > 0,
          "vocabulary sizes must be positive");
  require(n_clusters > 0 && n_clusters <= n_items,
          "n_clusters must be in [1, n_items]");
  require(requests_per_user > 0, "requests_per_user must be positive");
  require(noise_rate >= 0.0 && noise_rate <= 1.0,
          "noise_rate must be in [0, 1]");
  require(drift_prob >= 0.0 && drift_prob <= 1.0,
          "drift_prob must be in [0, 1]");
  if (n_clusters == 1 && negatives_per_positive > 0) {
    throw DataError(
        "degenerate single-cluster config: negatives need another cluster");
  }
}

GeneratorConfig GeneratorConfigFromJson(const nlohmann::json& json) {
  GeneratorConfig c;
  StrictObject o(json, "generator config");
  o.Read("n_users", &c.n_users);
  o.Read("n_items", &c.n_items);
  o.Read("n_contexts", &c.n_contexts);
  o.Read("n_clusters", &c.n_clusters);
  o.Read("requests_per_user", &c.requests_per_user);
  o.Read("t_rt", &c.t_rt);
  o.Read("t_st", &c.t_st);
  o.Read("t_lt", &c.t_lt);
  o.Read("noise_rate", &c.noise_rate);
  o.Read("drift_prob", &c.drift_prob);
  o.Read("negatives_per_positive", &c.negatives_per_positive);
  std::size_t seed = c.seed;
  o.Read("seed", &seed);
  c.seed = seed;
  o.Finish();
  return c;
}

nlohmann::json GeneratorConfigToJson(const GeneratorConfig& c) {
  nlohmann::ordered_json j;
  j["n_users"] = c.n_users;
  j["n_items"] = c.n_items;
  j["n_contexts"] = c.n_contexts;
  j["n_clusters"] = c.n_clusters;
  j["requests_per_user"] = c.requests_per_user;
  j["t_rt"] = c.t_rt;
  j["t_st"] = c.t_st;
  j["t_lt"] = c.t_lt;
  j["noise_rate"] = c.noise_rate;
  j["drift_prob"] = c.drift_prob;
  j["negatives_per_positive"] = c.negatives_per_positive;
  j["seed"] = c.seed;
  return j;
}

std::size_t ClusterOfItem(std::size_t item, std::size_t n_items,
                          std::size_t n_clusters) {
  const std::size_t width = n_items / n_clusters;
  return std::min(item / width, n_clusters - 1);
}

std::vector<Instance> Generate(const GeneratorConfig& config) {
  config.Validate();
  std::mt19937_64 rng(config.seed);
  const std::size_t k = config.n_clusters;

  auto item_in = [&](std::size_t cluster) {
    const ClusterRange r = RangeOfCluster(cluster, config.n_items, k);
    return r.begin + UniformIndex(rng, r.end - r.begin);
  };
  auto item_outside = [&](std::size_t cluster) {
    const ClusterRange r = RangeOfCluster(cluster, config.n_items, k);
    const std::size_t pick = UniformIndex(rng, config.n_items - (r.end - r.begin));
    return pick < r.begin ? pick : pick + (r.end - r.begin);
  };
  auto draw_sequence = [&](std::size_t cluster, std::size_t cap) {
    std::vector<std::size_t> seq;
    if (cap == 0) return seq;
    const std::size_t min_len = std::max<std::size_t>(1, (cap + 1) / 2);
    const std::size_t len = min_len + UniformIndex(rng, cap - min_len + 1);
    for (std::size_t t = 0; t < len; ++t) {
      seq.push_back(Bernoulli(rng, config.noise_rate)
                        ? UniformIndex(rng, config.n_items)
                        : item_in(cluster));
    }
    return seq;
  };

  std::vector<Instance> out;
  out.reserve(config.n_users * config.requests_per_user *
              (1 + config.negatives_per_positive));
  for (std::size_t user = 0; user < config.n_users; ++user) {
    const std::size_t habit = UniformIndex(rng, k);
    const std::size_t short_term = UniformIndex(rng, k);
    for (std::size_t r = 0; r < config.requests_per_user; ++r) {
      const std::size_t session = Bernoulli(rng, config.drift_prob)
                                      ? UniformIndex(rng, k)
                                      : short_term;
      Instance base;
      base.request_id = user * config.requests_per_user + r;
      base.user_id = user;
      base.context_id = UniformIndex(rng, config.n_contexts);
      base.seq_lt = draw_sequence(habit, config.t_lt);
      base.seq_st = draw_sequence(short_term, config.t_st);
      base.seq_rt = draw_sequence(session, config.t_rt);

      std::vector<Instance> group;
      Instance positive = base;
      positive.target_item_id = item_in(session);
      positive.label = 1;
      group.push_back(std::move(positive));
      for (std::size_t n = 0; n < config.negatives_per_positive; ++n) {
        Instance negative = base;
        negative.target_item_id = item_outside(session);
        negative.label = 0;
        group.push_back(std::move(negative));
      }
      std::shuffle(group.begin(), group.end(), rng);
      for (Instance& x : group) out.push_back(std::move(x));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Splits and files

Split SplitOfRequest(std::uint64_t request_id) {
  const std::uint64_t bucket = SplitMix64(request_id) % 10;
  if (bucket < 8) return Split::kTrain;
  return bucket == 8 ? Split::kValidation : Split::kTest;
}

DatasetSplits SplitByRequest(std::span<const Instance> instances) {
  DatasetSplits splits;
  for (const Instance& x : instances) {
    switch (SplitOfRequest(x.request_id)) {
      case Split::kTrain: splits.train.push_back(x); break;
      case Split::kValidation: splits.validation.push_back(x); break;
      case Split::kTest: splits.test.push_back(x); break;
    }
  }
  return splits;
}

nlohmann::ordered_json InstanceToJson(const Instance& x) {
  nlohmann::ordered_json j;
  j["request_id"] = x.request_id;
  j["user_id"] = x.user_id;
  j["context_id"] = x.context_id;
  j["target_item_id"] = x.target_item_id;
  j["seq_rt"] = x.seq_rt;
  j["seq_st"] = x.seq_st;
  j["seq_lt"] = x.seq_lt;
  j["label"] = x.label;
  return j;
}

Instance InstanceFromJson(const nlohmann::json& j) {
  if (!j.is_object()) throw DataError("record is not a JSON object");
  for (const char* field : kFields) {
    if (!j.contains(field)) {
      throw DataError(std::string("missing field '") + field + "'");
    }
  }
  if (j.size() != std::size(kFields)) {
    for (const auto& [key, _] : j.items()) {
      if (std::find_if(std::begin(kFields), std::end(kFields),
                       [&](const char* f) { return key == f; }) ==
          std::end(kFields)) {
        throw DataError("unknown field '" + key + "'");
      }
    }
  }
  Instance x;
  x.request_id = CheckedId(j, "request_id");
  x.user_id = CheckedId(j, "user_id");
  x.context_id = CheckedId(j, "context_id");
  x.target_item_id = CheckedId(j, "target_item_id");
  x.seq_rt = CheckedSequence(j, "seq_rt");
  x.seq_st = CheckedSequence(j, "seq_st");
  x.seq_lt = CheckedSequence(j, "seq_lt");
  const auto& label = j.at("label");
  if (!label.is_number_integer() ||
      (label.get<std::int64_t>() != 0 && label.get<std::int64_t>() != 1)) {
    throw DataError("field 'label' must be 0 or 1");
  }
  x.label = label.get<int>();
  return x;
}

void WriteJsonl(std::span<const Instance> instances,
                const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  for (const Instance& x : instances) out << InstanceToJson(x).dump() << '\n';
  if (!out) throw DataError("write failed for " + path.string());
}

std::vector<Instance> ReadJsonl(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<Instance> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(InstanceFromJson(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": " +
                      e.what());
    } catch (const DataError& e) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": " +
                      e.what());
    }
  }
  return out;
}

std::string Sha256File(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(),
                                                              EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) {
    throw DataError("sha256 init failed");
  }
  std::array<char, 1 << 16> buffer;
  while (in) {
    in.read(buffer.data(), buffer.size());
    if (in.gcount() > 0) {
      EVP_DigestUpdate(ctx.get(), buffer.data(),
                       static_cast<std::size_t>(in.gcount()));
    }
  }
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest;
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), digest.data(), &len);
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i) {
    hex << std::hex << std::setw(2) << std::setfill('0')
        << static_cast<int>(digest[i]);
  }
  return hex.str();
}

DatasetFiles DatasetFilesIn(const std::filesystem::path& dir) {
  return {dir / "train.jsonl", dir / "val.jsonl", dir / "test.jsonl",
          dir / "manifest.json"};
}

nlohmann::json WriteGeneratedDataset(const GeneratorConfig& config,
                                     const std::filesystem::path& dir) {
  const std::vector<Instance> all = Generate(config);
  const DatasetSplits splits = SplitByRequest(all);
  std::filesystem::create_directories(dir);
  const DatasetFiles files = DatasetFilesIn(dir);
  WriteJsonl(splits.train, files.train);
  WriteJsonl(splits.validation, files.validation);
  WriteJsonl(splits.test, files.test);

  std::size_t positives = 0;
  for (const Instance& x : all) positives += x.label;

  nlohmann::ordered_json manifest;
  manifest["format"] = "gatedctr-dataset";
  manifest["version"] = 1;
  manifest["generator"] = GeneratorConfigToJson(config);
  manifest["counts"] = {{"train", splits.train.size()},
                        {"val", splits.validation.size()},
                        {"test", splits.test.size()},
                        {"positives", positives}};
  manifest["sha256"] = {{"train.jsonl", Sha256File(files.train)},
                        {"val.jsonl", Sha256File(files.validation)},
                        {"test.jsonl", Sha256File(files.test)}};
  WriteJsonFile(files.manifest, manifest);
  return manifest;
}

void VerifyManifest(const std::filesystem::path& dir) {
  const DatasetFiles files = DatasetFilesIn(dir);
  nlohmann::json manifest;
  try {
    manifest = ReadJsonFile(files.manifest);
  } catch (const ConfigError& e) {
    throw DataError(e.what());
  }
  if (!manifest.contains("sha256") || !manifest["sha256"].is_object()) {
    throw DataError(files.manifest.string() + ": no checksums");
  }
  for (const auto& [name, sum] : manifest["sha256"].items()) {
    const std::string actual = Sha256File(dir / name);
    if (actual != sum.get<std::string>()) {
      throw DataError("checksum mismatch for " + (dir / name).string());
    }
  }
}

}  // namespace gatedctr
