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

#include "gatedctr/experiment.h"

#include <glob.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#include "gatedctr/json_config.h"

namespace gatedctr {
namespace fs = std::filesystem;

// --- datasets --------------------------------------------------------------

namespace {

void GrowVocabulary(std::span<const Instance> xs, Vocabulary& v) {
  auto grow = [](std::size_t& n, std::size_t id) { n = std::max(n, id + 1); };
  for (const Instance& x : xs) {
    grow(v.n_users, x.user_id);
    grow(v.n_contexts, x.context_id);
    grow(v.n_items, x.target_item_id);
    for (const auto* seq : {&x.seq_rt, &x.seq_st, &x.seq_lt}) {
      for (std::size_t id : *seq) grow(v.n_items, id);
    }
  }
}

}  // namespace

LoadedDataset LoadDataset(const fs::path& dir) {
  if (!fs::is_directory(dir)) {
    throw DataError("dataset directory " + dir.string() + " does not exist");
  }
  LoadedDataset ds;
  ds.dir = dir;
  const DatasetFiles files = DatasetFilesIn(dir);
  std::optional<GeneratorConfig> generator;
  if (fs::exists(files.manifest)) {
    VerifyManifest(dir);
    nlohmann::json manifest;
    try {
      manifest = ReadJsonFile(files.manifest);
    } catch (const ConfigError& e) {
      throw DataError(e.what());
    }
    if (manifest.contains("generator")) {
      try {
        generator = GeneratorConfigFromJson(manifest["generator"]);
      } catch (const ConfigError& e) {
        throw DataError(files.manifest.string() + ": " + e.what());
      }
    }
  }
  ds.splits.train = ReadJsonl(files.train);
  ds.splits.validation = ReadJsonl(files.validation);
  ds.splits.test = ReadJsonl(files.test);
  if (generator) {
    ds.vocab = generator->vocabulary();
    ds.noise_rate = generator->noise_rate;
  } else {
    GrowVocabulary(ds.splits.train, ds.vocab);
    GrowVocabulary(ds.splits.validation, ds.vocab);
    GrowVocabulary(ds.splits.test, ds.vocab);
  }
  ValidateIds(ds.splits.train, ds.vocab);
  ValidateIds(ds.splits.validation, ds.vocab);
  ValidateIds(ds.splits.test, ds.vocab);
  return ds;
}

Split ParseSplit(const std::string& name) {
  if (name == "train") return Split::kTrain;
  if (name == "val" || name == "validation") return Split::kValidation;
  if (name == "test") return Split::kTest;
  throw UsageError("unknown split '" + name + "' (valid: train, val, test)");
}

std::vector<Instance> LoadInstances(const fs::path& path, Split split) {
  if (fs::is_directory(path)) {
    const DatasetFiles files = DatasetFilesIn(path);
    switch (split) {
      case Split::kTrain:
        return ReadJsonl(files.train);
      case Split::kValidation:
        return ReadJsonl(files.validation);
      case Split::kTest:
        return ReadJsonl(files.test);
    }
  }
  return ReadJsonl(path);
}

std::vector<fs::path> ExpandGlob(const std::string& pattern) {
  glob_t matches{};
  const int rc = glob(pattern.c_str(), 0, nullptr, &matches);
  std::vector<fs::path> dirs;
  if (rc == 0) {
    for (std::size_t i = 0; i < matches.gl_pathc; ++i) {
      const fs::path p(matches.gl_pathv[i]);
      if (fs::is_directory(p)) dirs.push_back(p);
    }
  }
  globfree(&matches);
  if (rc != 0 && rc != GLOB_NOMATCH) {
    throw DataError("cannot expand '" + pattern + "'");
  }
  std::sort(dirs.begin(), dirs.end());
  return dirs;
}

// --- gen-data --------------------------------------------------------------

std::string NoiseRateDirName(double noise_rate) {
  std::ostringstream os;
  os << "rho_" << noise_rate;
  return os.str();
}

std::vector<nlohmann::json> RunGenData(const GenDataRequest& request,
                                       std::ostream& log) {
  std::vector<std::pair<GeneratorConfig, fs::path>> jobs;
  if (request.noise_rates.empty()) {
    jobs.emplace_back(request.config, request.out);
  } else {
    for (double rho : request.noise_rates) {
      GeneratorConfig c = request.config;
      c.noise_rate = rho;
      jobs.emplace_back(c, request.out / NoiseRateDirName(rho));
    }
  }
  for (const auto& [config, dir] : jobs) config.Validate();

  std::vector<nlohmann::json> manifests;
  for (const auto& [config, dir] : jobs) {
    nlohmann::json m = WriteGeneratedDataset(config, dir);
    log << "wrote " << dir.string() << ": train " << m["counts"]["train"]
        << ", val " << m["counts"]["val"] << ", test " << m["counts"]["test"]
        << " instances\n";
    manifests.push_back(std::move(m));
  }
  return manifests;
}

// --- train -----------------------------------------------------------------

TrainOutcome RunTrain(const TrainRequest& request, std::ostream& log) {
  const LoadedDataset ds = LoadDataset(request.data);
  const ModelConfig model_config =
      ModelConfigFromJson(request.model_config, ds.vocab);

  log << "training " << request.data.string() << " (" << ds.splits.train.size()
      << " train / " << ds.splits.validation.size() << " val), seed "
      << request.train.seed << "\n";
  TrainOutcome outcome{
      Train(model_config, request.ablation, ds.splits.train,
            ds.splits.validation, request.train,
            [&log](const EpochRecord& r) {
              log << "  epoch " << r.epoch << "  loss " << std::fixed
                  << std::setprecision(5) << r.train_loss << "  val AUC "
                  << r.val_auc << std::defaultfloat << "\n";
            }),
      model_config};

  fs::create_directories(request.out);
  SaveCheckpoint(request.out / "checkpoint.json", outcome.result.params,
                 request.ablation);
  WriteHistory(outcome.result.history, request.out / "history.jsonl");
  nlohmann::ordered_json config;
  config["model"] = ModelConfigToJson(model_config);
  config["ablation"] = AblationToJson(request.ablation);
  config["train"] = TrainConfigToJson(request.train);
  config["best_epoch"] = outcome.result.best_epoch;
  config["best_val_auc"] = outcome.result.best_val_auc;
  WriteJsonFile(request.out / "config.json", config);
  return outcome;
}

// --- eval ------------------------------------------------------------------

std::vector<Prediction> ScoreInstances(const Checkpoint& checkpoint,
                                       std::span<const Instance> instances) {
  ValidateIds(instances, checkpoint.params.config.vocab);
  const std::vector<double> scores =
      Predict(checkpoint.params, checkpoint.ablation, instances);
  std::vector<Prediction> rows;
  rows.reserve(instances.size());
  for (std::size_t i = 0; i < instances.size(); ++i) {
    rows.push_back({instances[i].request_id, scores[i], instances[i].label});
  }
  return rows;
}

// --- grad-check ------------------------------------------------------------

Vocabulary GradCheckVocabulary() { return {4, 32, 3}; }

GradCheckReport RunGradCheck(const GradCheckRequest& request) {
  const ModelConfig config =
      ModelConfigFromJson(request.model_config, GradCheckVocabulary());
  const ModelParams params = ModelParams::Initialize(
      config, request.ablation.fusion_context, request.seed);

  GeneratorConfig g;
  g.n_users = config.vocab.n_users;
  g.n_items = config.vocab.n_items;
  g.n_contexts = config.vocab.n_contexts;
  g.n_clusters = std::min<std::size_t>(4, config.vocab.n_items);
  g.requests_per_user = 1;
  g.t_rt = 4;
  g.t_st = 6;
  g.t_lt = 8;
  g.negatives_per_positive = 1;
  g.seed = request.seed;
  std::vector<Instance> instances = Generate(g);
  if (instances.size() < 2) {
    throw DataError("grad-check vocabulary yields fewer than 2 instances");
  }
  instances.resize(2);
  const Batch batch = MakeBatch(instances, config.vocab);

  const ParamList named = params.NamedParams();
  for (const auto& [path, t] : named) Tensor(t).set_requires_grad(true);
  auto loss_fn = [&] {
    const ForwardResult fwd = Forward(params, request.ablation, batch);
    return BinaryCrossEntropy(fwd.probabilities, batch.labels);
  };

  GradCheckReport report;
  report.results = CheckGradients(loss_fn, named, request.options);
  report.passed = true;
  for (const TensorCheckResult& r : report.results) {
    report.scalars_checked += r.entries_checked;
    report.max_relative_error =
        std::max(report.max_relative_error, r.max_relative_error);
    report.passed = report.passed && r.passed;
  }
  return report;
}

// --- ablate ----------------------------------------------------------------

void AblationRequest::Validate() const {
  if (datasets.empty()) throw UsageError("ablate: no dataset directories");
  if (seeds.empty()) throw UsageError("ablate: seed list is empty");
  if (variants.empty()) throw UsageError("ablate: variant list is empty");
  for (const fs::path& d : datasets) {
    if (!fs::is_directory(d)) {
      throw DataError("dataset directory " + d.string() + " does not exist");
    }
  }
  for (const std::string& v : variants) AblationPreset(v);
  train.Validate();
}

std::pair<double, double> MeanStd(std::span<const double> values) {
  if (values.empty()) return {0.0, 0.0};
  double mean = 0.0;
  for (double x : values) mean += x;
  mean /= static_cast<double>(values.size());
  if (values.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double x : values) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / static_cast<double>(values.size() - 1))};
}

nlohmann::json AblationCell::ToJson() const {
  nlohmann::ordered_json j;
  j["dataset"] = dataset;
  j["rho"] = noise_rate ? nlohmann::ordered_json(*noise_rate)
                        : nlohmann::ordered_json(nullptr);
  j["variant"] = variant;
  j["seed"] = seed;
  j["status"] = ok ? "ok" : "error";
  if (ok) {
    j["auc"] = test.auc;
    j["ndcg"] = test.ndcg;
    j["map"] = test.map;
    j["logloss"] = test.logloss;
    j["best_epoch"] = best_epoch;
    j["best_val_auc"] = best_val_auc;
  } else {
    j["error"] = error;
  }
  return j;
}

nlohmann::json AblationRow::ToJson() const {
  nlohmann::ordered_json j;
  j["group"] = group;
  j["variant"] = variant;
  j["runs"] = runs;
  j["failures"] = failures;
  j["auc_mean"] = auc_mean;
  j["auc_std"] = auc_std;
  j["ndcg_mean"] = ndcg_mean;
  j["ndcg_std"] = ndcg_std;
  j["map_mean"] = map_mean;
  j["map_std"] = map_std;
  return j;
}

std::string AblationReport::ToText() const {
  std::ostringstream os;
  os << std::left << std::setw(12) << "group" << std::setw(18) << "variant"
     << std::setw(6) << "runs" << std::setw(20) << "AUC" << std::setw(20)
     << "NDCG" << "MAP\n";
  auto cell = [](double mean, double sd) {
    std::ostringstream c;
    c << std::fixed << std::setprecision(4) << mean << " +- " << sd;
    return c.str();
  };
  for (const AblationRow& r : rows) {
    std::string runs = std::to_string(r.runs);
    if (r.failures > 0) runs += "!" + std::to_string(r.failures);
    os << std::setw(12) << r.group << std::setw(18) << r.variant
       << std::setw(6) << runs << std::setw(20) << cell(r.auc_mean, r.auc_std)
       << std::setw(20) << cell(r.ndcg_mean, r.ndcg_std)
       << cell(r.map_mean, r.map_std) << "\n";
  }
  return os.str();
}

namespace {

AblationRow Summarize(const std::string& group, const std::string& variant,
                      const std::vector<const AblationCell*>& cells) {
  AblationRow row;
  row.group = group;
  row.variant = variant;
  std::vector<double> auc, ndcg, map;
  for (const AblationCell* c : cells) {
    if (!c->ok) {
      ++row.failures;
      continue;
    }
    auc.push_back(c->test.auc);
    ndcg.push_back(c->test.ndcg);
    map.push_back(c->test.map);
  }
  row.runs = auc.size();
  std::tie(row.auc_mean, row.auc_std) = MeanStd(auc);
  std::tie(row.ndcg_mean, row.ndcg_std) = MeanStd(ndcg);
  std::tie(row.map_mean, row.map_std) = MeanStd(map);
  return row;
}

std::string RhoGroup(double rho) {
  std::ostringstream os;
  os << "rho=" << rho;
  return os.str();
}

}  // namespace

AblationReport RunAblation(const AblationRequest& request, std::ostream& log) {
  request.Validate();
  AblationReport report;
  for (const fs::path& dir : request.datasets) {
    std::optional<LoadedDataset> ds;
    std::string load_error;
    try {
      ds = LoadDataset(dir);
    } catch (const std::exception& e) {
      load_error = e.what();
    }
    for (const std::string& variant : request.variants) {
      for (std::uint64_t seed : request.seeds) {
        AblationCell cell;
        cell.dataset = dir.filename().string();
        cell.variant = variant;
        cell.seed = seed;
        if (!ds) {
          cell.error = load_error;
          report.cells.push_back(cell);
          continue;
        }
        cell.noise_rate = ds->noise_rate;
        try {
          const AblationConfig ablation = AblationPreset(variant);
          const ModelConfig model_config =
              ModelConfigFromJson(request.model_config, ds->vocab);
          TrainConfig train = request.train;
          train.seed = seed;
          TrainResult result =
              Train(model_config, ablation, ds->splits.train,
                    ds->splits.validation, train);
          const Checkpoint ck{std::move(result.params), ablation};
          const std::vector<Prediction> rows =
              ScoreInstances(ck, ds->splits.test);
          cell.test = Evaluate(rows, request.ndcg_k);
          cell.best_epoch = result.best_epoch;
          cell.best_val_auc = result.best_val_auc;
          cell.ok = true;
          if (!request.out.empty()) {
            const fs::path cell_dir = request.out / cell.dataset / variant /
                                      ("seed_" + std::to_string(seed));
            fs::create_directories(cell_dir);
            SaveCheckpoint(cell_dir / "checkpoint.json", ck.params, ablation);
            WriteHistory(result.history, cell_dir / "history.jsonl");
            WriteJsonFile(cell_dir / "metrics.json", cell.test.ToJson());
          }
        } catch (const std::exception& e) {
          cell.ok = false;
          cell.error = e.what();
        }
        log << cell.dataset << " " << variant << " seed " << seed << ": ";
        if (cell.ok) {
          log << "test AUC " << std::fixed << std::setprecision(4)
              << cell.test.auc << std::defaultfloat << "\n";
        } else {
          log << "FAILED: " << cell.error << "\n";
        }
        report.cells.push_back(std::move(cell));
      }
    }
  }

  for (const std::string& variant : request.variants) {
    std::vector<const AblationCell*> all;
    for (const AblationCell& c : report.cells) {
      if (c.variant == variant) all.push_back(&c);
    }
    report.rows.push_back(Summarize("all", variant, all));
  }
  std::map<double, bool> rhos;
  for (const AblationCell& c : report.cells) {
    if (c.noise_rate) rhos[*c.noise_rate] = true;
  }
  for (const auto& [rho, _] : rhos) {
    for (const std::string& variant : request.variants) {
      std::vector<const AblationCell*> cells;
      for (const AblationCell& c : report.cells) {
        if (c.variant == variant && c.noise_rate && *c.noise_rate == rho) {
          cells.push_back(&c);
        }
      }
      report.rows.push_back(Summarize(RhoGroup(rho), variant, cells));
    }
  }

  if (!request.out.empty()) {
    fs::create_directories(request.out);
    std::ofstream runs(request.out / "ablation_runs.jsonl", std::ios::binary);
    for (const AblationCell& c : report.cells) runs << c.ToJson().dump() << '\n';
    std::ofstream table(request.out / "ablation_table.jsonl", std::ios::binary);
    for (const AblationRow& r : report.rows) table << r.ToJson().dump() << '\n';
    std::ofstream text(request.out / "ablation_table.txt", std::ios::binary);
    text << report.ToText();
    if (!runs || !table || !text) {
      throw DataError("cannot write ablation records to " + request.out.string());
    }
  }
  return report;
}

}  // namespace gatedctr
