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

// gatedctr: generate data, train, evaluate, gradient-check and ablate.
//
// Exit codes: 0 success, 1 usage or config error, 2 data error,
// 3 gradient check failed.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "gatedctr/checkpoint.h"
#include "gatedctr/experiment.h"
#include "gatedctr/json_config.h"

namespace fs = std::filesystem;
using namespace gatedctr;  // NOLINT(build/namespaces)

namespace {

nlohmann::json ReadOptionalJson(const std::string& path) {
  if (path.empty()) return nlohmann::json::object();
  return ReadJsonFile(path);
}

// A preset name, or a .json file holding a preset name or an object.
AblationConfig ResolveAblation(const std::string& value) {
  if (value.size() > 5 && value.ends_with(".json") && fs::exists(value)) {
    return AblationFromJson(ReadJsonFile(value));
  }
  return AblationPreset(value);
}

TrainConfig ResolveTrainConfig(const std::string& path,
                               std::optional<std::size_t> max_epochs) {
  TrainConfig c = TrainConfigFromJson(ReadOptionalJson(path));
  if (max_epochs) c.max_epochs = *max_epochs;
  return c;
}

// --- gen-data ---------------------------------------------------------------

struct GenDataFlags {
  std::string config;
  std::string out;
  std::vector<double> noise_rates;
  std::optional<std::uint64_t> seed;
};

int GenData(const GenDataFlags& f) {
  GenDataRequest req;
  if (!f.config.empty()) {
    req.config = GeneratorConfigFromJson(ReadJsonFile(f.config));
  }
  if (f.seed) req.config.seed = *f.seed;
  req.out = f.out;
  req.noise_rates = f.noise_rates;
  RunGenData(req, std::cerr);
  return kExitOk;
}

// --- train ------------------------------------------------------------------

struct TrainFlags {
  std::string data;
  std::string model_config;
  std::string ablation = "full";
  std::string train_config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> max_epochs;
  std::string out;
};

int TrainCommand(const TrainFlags& f) {
  TrainRequest req;
  req.data = f.data;
  req.model_config = ReadOptionalJson(f.model_config);
  req.ablation = ResolveAblation(f.ablation);
  req.train = ResolveTrainConfig(f.train_config, f.max_epochs);
  if (f.seed) req.train.seed = *f.seed;
  req.out = f.out;
  const TrainOutcome outcome = RunTrain(req, std::cerr);
  std::cout << "best epoch " << outcome.result.best_epoch << ", val AUC "
            << std::fixed << std::setprecision(6)
            << outcome.result.best_val_auc << "\n"
            << "checkpoint written to " << (fs::path(f.out) / "checkpoint.json").string()
            << "\n";
  return kExitOk;
}

// --- eval -------------------------------------------------------------------

struct EvalFlags {
  std::string checkpoint;
  std::string data;
  std::string split = "test";
  std::string predictions;
  std::size_t ndcg_k = 0;
  std::string out;
  bool json = false;
};

int EvalCommand(const EvalFlags& f) {
  std::vector<Prediction> rows;
  if (!f.predictions.empty()) {
    if (!f.checkpoint.empty() || !f.data.empty()) {
      throw UsageError("--predictions excludes --checkpoint and --data");
    }
    rows = ReadPredictions(f.predictions);
  } else {
    if (f.checkpoint.empty() || f.data.empty()) {
      throw UsageError("eval needs --checkpoint and --data, or --predictions");
    }
    const Checkpoint ck = LoadCheckpoint(f.checkpoint);
    const std::vector<Instance> instances =
        LoadInstances(f.data, ParseSplit(f.split));
    rows = ScoreInstances(ck, instances);
  }
  MetricsReport report;
  try {
    report = Evaluate(rows, f.ndcg_k);
  } catch (const MetricError& e) {
    throw DataError(e.what());
  }
  if (!f.out.empty()) {
    fs::create_directories(f.out);
    WriteJsonFile(fs::path(f.out) / "metrics.json", report.ToJson());
    if (f.predictions.empty()) {
      WritePredictions(rows, fs::path(f.out) / "predictions.jsonl");
    }
  }
  if (f.json) {
    std::cout << report.ToJson().dump() << "\n";
  } else {
    std::cout << report.ToText();
  }
  return kExitOk;
}

// --- grad-check -------------------------------------------------------------

struct GradCheckFlags {
  std::string model_config;
  std::string ablation = "full";
  std::uint64_t seed = 1;
  double step = 1e-5;
  double tolerance = 1e-4;
  std::size_t max_entries = 0;
};

int GradCheckCommand(const GradCheckFlags& f) {
  GradCheckRequest req;
  req.model_config = ReadOptionalJson(f.model_config);
  req.ablation = ResolveAblation(f.ablation);
  req.seed = f.seed;
  req.options.step = f.step;
  req.options.tolerance = f.tolerance;
  req.options.max_entries_per_tensor = f.max_entries;
  req.options.seed = f.seed;

  const auto start = std::chrono::steady_clock::now();
  const GradCheckReport report = RunGradCheck(req);
  const double seconds = std::chrono::duration<double>(
                             std::chrono::steady_clock::now() - start)
                             .count();
  std::size_t failures = 0;
  for (const TensorCheckResult& r : report.results) {
    std::cout << (r.passed ? "  ok    " : "  FAIL  ") << std::left
              << std::setw(36) << r.path << std::right << std::setw(7)
              << r.entries_checked << "  max rel-err " << std::scientific
              << std::setprecision(3) << r.max_relative_error;
    if (!r.passed) {
      std::cout << "  (entry " << r.worst_entry << ": analytic "
                << r.analytic_at_worst << ", numeric " << r.numeric_at_worst
                << ")";
      ++failures;
    }
    std::cout << std::defaultfloat << "\n";
  }
  std::cerr << report.scalars_checked << " scalars in " << std::fixed
            << std::setprecision(1) << seconds << " s\n";
  std::cout << std::scientific << std::setprecision(3);
  if (report.passed) {
    std::cout << "all " << report.results.size()
              << " parameter paths pass, max rel-err = "
              << report.max_relative_error << "\n";
    return kExitOk;
  }
  std::cout << failures << " of " << report.results.size()
            << " parameter paths fail, max rel-err = "
            << report.max_relative_error << " (tolerance " << f.tolerance
            << ")\n";
  return kExitCheckFailed;
}

// --- ablate -----------------------------------------------------------------

struct AblateFlags {
  std::string data_glob;
  std::vector<std::uint64_t> seeds;
  std::vector<std::string> variants;
  std::string model_config;
  std::string train_config;
  std::optional<std::size_t> max_epochs;
  std::size_t ndcg_k = 0;
  std::string out;
};

int AblateCommand(const AblateFlags& f) {
  AblationRequest req;
  req.datasets = ExpandGlob(f.data_glob);
  if (req.datasets.empty()) {
    throw DataError("no dataset directories match '" + f.data_glob + "'");
  }
  req.seeds = f.seeds;
  if (!f.variants.empty()) req.variants = f.variants;
  req.model_config = ReadOptionalJson(f.model_config);
  req.train = ResolveTrainConfig(f.train_config, f.max_epochs);
  req.ndcg_k = f.ndcg_k;
  req.out = f.out;
  const AblationReport report = RunAblation(req, std::cerr);
  std::cout << report.ToText();
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gated multi-view CTR models: data, training and evaluation"};
  app.require_subcommand(1);

  GenDataFlags gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "Generate a synthetic dataset");
  gen_cmd->add_option("--config", gen.config, "Generator config (JSON)")
      ->check(CLI::ExistingFile);
  gen_cmd->add_option("--out", gen.out, "Output directory")->required();
  gen_cmd->add_option("--noise-rates", gen.noise_rates,
                      "One dataset per noise rate, in rho_<value> subdirs")
      ->delimiter(',');
  gen_cmd->add_option("--seed", gen.seed, "Overrides the config seed");

  TrainFlags train;
  auto* train_cmd = app.add_subcommand("train", "Train one model");
  train_cmd->add_option("--data", train.data, "Dataset directory")->required();
  train_cmd->add_option("--model-config", train.model_config,
                        "Model config (JSON)")
      ->check(CLI::ExistingFile);
  train_cmd->add_option("--ablation", train.ablation,
                        "Preset name or ablation JSON file")
      ->capture_default_str();
  train_cmd->add_option("--train-config", train.train_config,
                        "Train config (JSON)")
      ->check(CLI::ExistingFile);
  train_cmd->add_option("--seed", train.seed, "Overrides the train config seed");
  train_cmd->add_option("--max-epochs", train.max_epochs,
                        "Overrides the train config epoch limit");
  train_cmd->add_option("--out", train.out, "Output directory")->required();

  EvalFlags eval;
  auto* eval_cmd = app.add_subcommand("eval", "Report AUC, NDCG and MAP");
  eval_cmd->add_option("--checkpoint", eval.checkpoint, "Checkpoint file")
      ->check(CLI::ExistingFile);
  eval_cmd->add_option("--data", eval.data, "Dataset directory or JSONL file")
      ->check(CLI::ExistingPath);
  eval_cmd->add_option("--split", eval.split,
                       "Split used when --data is a directory")
      ->capture_default_str();
  eval_cmd->add_option("--predictions", eval.predictions,
                       "Score a predictions JSONL file instead")
      ->check(CLI::ExistingFile);
  eval_cmd->add_option("--ndcg-k", eval.ndcg_k, "NDCG cutoff, 0 = full list")
      ->capture_default_str();
  eval_cmd->add_option("--out", eval.out,
                       "Directory for metrics.json and predictions.jsonl");
  eval_cmd->add_flag("--json", eval.json, "Print the report as one JSON record");

  GradCheckFlags gc;
  auto* gc_cmd = app.add_subcommand(
      "grad-check", "Compare backward with central finite differences");
  gc_cmd->add_option("--model-config", gc.model_config, "Model config (JSON)")
      ->check(CLI::ExistingFile);
  gc_cmd->add_option("--ablation", gc.ablation, "Preset name or JSON file")
      ->capture_default_str();
  gc_cmd->add_option("--seed", gc.seed)->capture_default_str();
  gc_cmd->add_option("--step", gc.step)->capture_default_str();
  gc_cmd->add_option("--tolerance", gc.tolerance)->capture_default_str();
  gc_cmd->add_option("--max-entries", gc.max_entries,
                     "Sampled entries per tensor, 0 = all")
      ->capture_default_str();

  AblateFlags ab;
  auto* ab_cmd = app.add_subcommand("ablate", "Variants x seeds sweep");
  ab_cmd->add_option("--data-glob", ab.data_glob,
                     "Glob of dataset directories")
      ->required();
  ab_cmd->add_option("--seeds", ab.seeds, "Comma-separated seeds")
      ->required()
      ->delimiter(',');
  ab_cmd->add_option("--variants", ab.variants,
                     "Comma-separated presets (default: the five main rows)")
      ->delimiter(',');
  ab_cmd->add_option("--model-config", ab.model_config, "Model config (JSON)")
      ->check(CLI::ExistingFile);
  ab_cmd->add_option("--train-config", ab.train_config, "Train config (JSON)")
      ->check(CLI::ExistingFile);
  ab_cmd->add_option("--max-epochs", ab.max_epochs,
                     "Overrides the train config epoch limit");
  ab_cmd->add_option("--ndcg-k", ab.ndcg_k, "NDCG cutoff, 0 = full list");
  ab_cmd->add_option("--out", ab.out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*gen_cmd) return GenData(gen);
    if (*train_cmd) return TrainCommand(train);
    if (*eval_cmd) return EvalCommand(eval);
    if (*gc_cmd) return GradCheckCommand(gc);
    if (*ab_cmd) return AblateCommand(ab);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}
