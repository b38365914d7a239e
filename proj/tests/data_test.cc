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

#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "test_util.h"

namespace gatedctr {
namespace {

GeneratorConfig SmallConfig(std::uint64_t seed = 1) {
  GeneratorConfig c;
  c.n_users = 200;
  c.n_items = 80;
  c.n_contexts = 5;
  c.n_clusters = 8;
  c.requests_per_user = 2;
  c.seed = seed;
  return c;
}

TEST(GeneratorTest, LabelBalanceIsExact) {
  for (std::size_t neg : {1, 2, 4}) {
    GeneratorConfig c = SmallConfig();
    c.negatives_per_positive = neg;
    const auto xs = Generate(c);
    std::size_t pos = 0;
    for (const Instance& x : xs) pos += x.label;
    EXPECT_EQ(xs.size(), pos * (1 + neg));
    std::map<std::uint64_t, std::pair<int, int>> per_request;
    for (const Instance& x : xs) {
      (x.label ? per_request[x.request_id].first : per_request[x.request_id].second)++;
    }
    for (const auto& [r, counts] : per_request) {
      EXPECT_EQ(counts.first, 1);
      EXPECT_EQ(counts.second, static_cast<int>(neg));
    }
  }
}

TEST(GeneratorTest, IdsInVocabularyAndLengthsWithinCaps) {
  const GeneratorConfig c = SmallConfig(2);
  const auto xs = Generate(c);
  EXPECT_NO_THROW(ValidateIds(xs, c.vocabulary()));
  for (const Instance& x : xs) {
    EXPECT_LE(x.seq_rt.size(), c.t_rt);
    EXPECT_LE(x.seq_st.size(), c.t_st);
    EXPECT_LE(x.seq_lt.size(), c.t_lt);
  }
}

TEST(GeneratorTest, NoiselessRealtimeViewPredictsTheLabel) {
  GeneratorConfig c = SmallConfig(3);
  c.noise_rate = 0.0;
  for (const Instance& x : Generate(c)) {
    ASSERT_FALSE(x.seq_rt.empty());
    const std::size_t session = ClusterOfItem(x.seq_rt[0], c.n_items, c.n_clusters);
    for (std::size_t item : x.seq_rt) {
      EXPECT_EQ(ClusterOfItem(item, c.n_items, c.n_clusters), session);
    }
    const bool in_session =
        ClusterOfItem(x.target_item_id, c.n_items, c.n_clusters) == session;
    EXPECT_EQ(in_session, x.label == 1);
  }
}

TEST(GeneratorTest, DeterministicPerSeed) {
  EXPECT_EQ(Generate(SmallConfig(4)), Generate(SmallConfig(4)));
  EXPECT_NE(Generate(SmallConfig(4)), Generate(SmallConfig(5)));
}

TEST(GeneratorTest, ClustersAreContiguousAndCoverAllItems) {
  std::set<std::size_t> seen;
  std::size_t prev = 0;
  for (std::size_t i = 0; i < 83; ++i) {
    const std::size_t c = ClusterOfItem(i, 83, 8);
    EXPECT_GE(c, prev);
    EXPECT_LT(c, 8u);
    prev = c;
    seen.insert(c);
  }
  EXPECT_EQ(seen.size(), 8u);
}

TEST(GeneratorTest, InvalidConfigsThrow) {
  GeneratorConfig c = SmallConfig();
  c.noise_rate = 1.5;
  EXPECT_THROW(c.Validate(), DataError);
  c = SmallConfig();
  c.drift_prob = -0.1;
  EXPECT_THROW(c.Validate(), DataError);
  c = SmallConfig();
  c.n_clusters = 100;
  EXPECT_THROW(c.Validate(), DataError);
  EXPECT_THROW(GeneratorConfigFromJson(nlohmann::json{{"n_user", 3}}), std::exception);
  const GeneratorConfig back = GeneratorConfigFromJson(GeneratorConfigToJson(SmallConfig(9)));
  EXPECT_EQ(GeneratorConfigToJson(back), GeneratorConfigToJson(SmallConfig(9)));
}

TEST(SplitTest, RequestsStayTogetherAndProportionsHold) {
  GeneratorConfig c = SmallConfig(6);
  c.n_users = 2000;
  const auto xs = Generate(c);
  const DatasetSplits s = SplitByRequest(xs);
  EXPECT_EQ(s.train.size() + s.validation.size() + s.test.size(), xs.size());
  std::map<std::uint64_t, Split> where;
  for (const auto* part : {&s.train, &s.validation, &s.test}) {
    for (const Instance& x : *part) {
      const Split sp = SplitOfRequest(x.request_id);
      auto [it, fresh] = where.emplace(x.request_id, sp);
      EXPECT_EQ(it->second, sp);
    }
  }
  const double n = static_cast<double>(xs.size());
  EXPECT_NEAR(s.train.size() / n, 0.8, 0.03);
  EXPECT_NEAR(s.validation.size() / n, 0.1, 0.02);
  EXPECT_NEAR(s.test.size() / n, 0.1, 0.02);
}

TEST(JsonlTest, ThousandInstancesRoundTrip) {
  testing::TempDir dir("jsonl");
  auto xs = Generate(SmallConfig(7));
  xs.resize(1000);
  xs[3].seq_lt.clear();
  WriteJsonl(xs, dir.path() / "x.jsonl");
  EXPECT_EQ(ReadJsonl(dir.path() / "x.jsonl"), xs);
}

TEST(JsonlTest, ErrorsCarryLineNumbers) {
  testing::TempDir dir("jsonl_bad");
  const std::string good = InstanceToJson(Generate(SmallConfig())[0]).dump();
  const std::vector<std::pair<std::string, std::string>> cases = {
      {"{not json", ":3"},
      {R"({"request_id":1,"user_id":0,"context_id":0,"target_item_id":0,"seq_rt":[],"seq_st":[],"seq_lt":[]})", "label"},
      {R"({"request_id":1,"user_id":0,"context_id":0,"target_item_id":0,"seq_rt":[],"seq_st":[],"seq_lt":[],"label":2})", "label"},
      {R"({"request_id":1,"user_id":0,"context_id":0,"target_item_id":0,"seq_rt":[],"seq_st":[],"seq_lt":[],"label":1,"extra":0})", "extra"},
      {R"({"request_id":1,"user_id":-1,"context_id":0,"target_item_id":0,"seq_rt":[],"seq_st":[],"seq_lt":[],"label":1})", "user_id"},
      {R"({"request_id":1,"user_id":0,"context_id":0,"target_item_id":0,"seq_rt":"x","seq_st":[],"seq_lt":[],"label":1})", "seq_rt"},
  };
  for (const auto& [line, needle] : cases) {
    const auto path = dir.path() / "bad.jsonl";
    {
      std::ofstream out(path);
      out << good << "\n\n" << line << "\n";
    }
    try {
      ReadJsonl(path);
      ADD_FAILURE() << line;
    } catch (const DataError& e) {
      const std::string what = e.what();
      EXPECT_NE(what.find(":3"), std::string::npos) << what;
      EXPECT_NE(what.find(needle), std::string::npos) << what;
    }
  }
}

TEST(ValidateIdsTest, NamesOffendingField) {
  auto xs = Generate(SmallConfig());
  xs[5].context_id = 99;
  try {
    ValidateIds(xs, SmallConfig().vocabulary());
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("context_id"), std::string::npos);
  }
}

TEST(DatasetTest, ManifestChecksumsDetectTampering) {
  testing::TempDir dir("dataset");
  const nlohmann::json manifest = WriteGeneratedDataset(SmallConfig(8), dir.path());
  const DatasetFiles files = DatasetFilesIn(dir.path());
  EXPECT_NO_THROW(VerifyManifest(dir.path()));
  EXPECT_EQ(manifest.dump(), nlohmann::json::parse(std::ifstream(files.manifest)).dump());
  std::ofstream(files.test, std::ios::app) << "\n";
  EXPECT_THROW(VerifyManifest(dir.path()), DataError);
}

TEST(Sha256Test, KnownDigest) {
  testing::TempDir dir("sha");
  std::ofstream(dir.path() / "abc") << "abc";
  EXPECT_EQ(Sha256File(dir.path() / "abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

}  // namespace
}  // namespace gatedctr
