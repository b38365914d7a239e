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

#include "gatedctr/checkpoint.h"

#include <fstream>
#include <set>

#include "gatedctr/json_config.h"

namespace gatedctr {

nlohmann::json CheckpointToJson(const ModelParams& params,
                                const AblationConfig& ablation) {
  nlohmann::ordered_json j;
  j["format"] = "gatedctr-checkpoint";
  j["version"] = kCheckpointVersion;
  j["model"] = ModelConfigToJson(params.config);
  j["fusion_context"] = FusionContextName(params.fusion_context);
  j["ablation"] = AblationToJson(ablation);
  nlohmann::ordered_json tensors = nlohmann::ordered_json::object();
  for (const auto& [path, t] : params.NamedParams()) {
    tensors[path] = {{"shape", t.shape()},
                     {"values", std::vector<double>(t.data().begin(),
                                                    t.data().end())}};
  }
  j["params"] = std::move(tensors);
  return j;
}

Checkpoint CheckpointFromJson(const nlohmann::json& j) {
  try {
    if (j.value("format", "") != "gatedctr-checkpoint") {
      throw CheckpointError("not a gatedctr checkpoint");
    }
    const int version = j.at("version").get<int>();
    if (version != kCheckpointVersion) {
      throw CheckpointError("unsupported checkpoint version " +
                            std::to_string(version));
    }
    const ModelConfig config = ModelConfigFromJson(j.at("model"), {});
    const FusionContext context =
        ParseFusionContext(j.at("fusion_context").get<std::string>());
    Checkpoint ck{ModelParams::Initialize(config, context, 0),
                  AblationFromJson(j.at("ablation"))};

    const auto& stored = j.at("params");
    std::set<std::string> seen;
    for (auto& [path, tensor] : ck.params.NamedParams()) {
      if (!stored.contains(path)) {
        throw CheckpointError("missing parameter '" + path + "'");
      }
      const auto& entry = stored.at(path);
      const Shape shape = entry.at("shape").get<Shape>();
      if (shape != tensor.shape()) {
        throw CheckpointError("parameter '" + path + "' has shape " +
                              ShapeToString(shape) + ", model expects " +
                              ShapeToString(tensor.shape()));
      }
      const auto values = entry.at("values").get<std::vector<double>>();
      if (values.size() != tensor.size()) {
        throw CheckpointError("parameter '" + path + "' holds " +
                              std::to_string(values.size()) + " values");
      }
      std::copy(values.begin(), values.end(), tensor.mutable_data().begin());
      seen.insert(path);
    }
    for (const auto& [path, _] : stored.items()) {
      if (!seen.contains(path)) {
        throw CheckpointError("unexpected parameter '" + path + "'");
      }
    }
    return ck;
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("malformed checkpoint: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw CheckpointError(std::string("malformed checkpoint: ") + e.what());
  } catch (const ConfigError& e) {
    throw CheckpointError(std::string("malformed checkpoint: ") + e.what());
  }
}

void SaveCheckpoint(const std::filesystem::path& path,
                    const ModelParams& params, const AblationConfig& ablation) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot write " + path.string());
  out << CheckpointToJson(params, ablation).dump() << "\n";
  if (!out) throw CheckpointError("write failed for " + path.string());
}

Checkpoint LoadCheckpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw CheckpointError(path.string() + ": " + e.what());
  }
  return CheckpointFromJson(j);
}

}  // namespace gatedctr
