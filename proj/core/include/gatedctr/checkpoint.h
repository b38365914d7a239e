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

// Versioned JSON checkpoints:
//
//   {"format": "gatedctr-checkpoint", "version": 1,
//    "model": {...ModelConfig...}, "ablation": {...},
//    "params": {"<path>": {"shape": [...], "values": [...]}, ...}}
//
// Values are written in shortest round-trip form, so Save followed by Load
// reproduces every float64 bit-exactly.

#ifndef GATEDCTR_CHECKPOINT_H_
#define GATEDCTR_CHECKPOINT_H_

#include <filesystem>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "gatedctr/model.h"

namespace gatedctr {

inline constexpr int kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Checkpoint {
  ModelParams params;
  AblationConfig ablation;
};

nlohmann::json CheckpointToJson(const ModelParams& params,
                                const AblationConfig& ablation);
Checkpoint CheckpointFromJson(const nlohmann::json& json);

void SaveCheckpoint(const std::filesystem::path& path,
                    const ModelParams& params, const AblationConfig& ablation);
Checkpoint LoadCheckpoint(const std::filesystem::path& path);

}  // namespace gatedctr

#endif  // GATEDCTR_CHECKPOINT_H_
