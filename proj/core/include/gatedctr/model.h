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

// End-to-end CTR model: embeddings, sifting, cascaded gated attention over
// three behavior views, context-gated fusion and an MLP prediction head.
//
// The pipeline for one instance is
//
//   e_t' = Sift(e_t)
//   (H_rt, H_st, H_lt) = Cascade(e_t', Sift(E_rt), Sift(E_st), Sift(E_lt))
//   v = Fuse(e_t', e_c, H_rt, H_st, H_lt)     or concat(H_rt, H_st, H_lt)
//   p = sigmoid(clamp(Head(concat(v, e_u, e_c, e_t')), -30, 30))
//
// and every stage can be switched back to its plain counterpart through
// AblationConfig, so the no-gate baseline is the same code path with the
// gating components disabled.

#ifndef GATEDCTR_MODEL_H_
#define GATEDCTR_MODEL_H_

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gatedctr/data.h"
#include "gatedctr/layers.h"
#include "gatedctr/query_calibration.h"
#include "gatedctr/sparse_gated_attention.h"
#include "gatedctr/tensor.h"
#include "gatedctr/view_fusion.h"

namespace gatedctr {

inline constexpr double kLogitClamp = 30.0;
inline constexpr double kProbabilityClamp = 1e-7;

struct ModelConfig {
  Vocabulary vocab;
  std::size_t dim = 16;
  std::size_t num_heads = 2;
  std::size_t head_dim = 0;        // 0 -> dim / num_heads
  std::size_t sifter_width = 0;    // 0 -> smallest power of two >= 2 dim
  std::size_t purifier_width = 0;  // 0 -> same rule on the 5 dim anchor
  std::size_t fusion_hidden = 0;   // 0 -> 2 dim
  std::size_t fusion_gate_dim = 0; // 0 -> dim
  std::size_t head_hidden = 64;
  // Target and sequence items through one sifter.
  bool share_target_sifter = false;
  // One sequence sifter for all three views.
  bool share_view_sifters = true;
  // One attention parameter set for all three views.
  bool share_view_attention = false;

  std::size_t resolved_head_dim() const;
  void Validate() const;
};

// Reads the "model" object of a config file. vocab comes from the data and
// is not part of the JSON.
ModelConfig ModelConfigFromJson(const nlohmann::json& json, Vocabulary vocab);
nlohmann::json ModelConfigToJson(const ModelConfig& config);

enum class AttentionVariant {
  kSoftmaxBaseline,  // linear Q/K/V, softmax, no gate
  kNaiveSigmoid,     // linear Q/K/V, elementwise sigmoid scores, no gate
  kNoSifting,        // softmax + output gate, no sifters
  kNoOutputGate,     // sifters + softmax, no gate
  kFull,             // sifters + softmax + output gate
};

const char* AttentionVariantName(AttentionVariant variant);
AttentionVariant ParseAttentionVariant(const std::string& name);

struct AblationConfig {
  bool asga = true;
  bool gcqc = true;
  bool cgdf = true;
  AttentionVariant attention = AttentionVariant::kFull;
  FusionContext fusion_context = FusionContext::kPurified;
  bool second_cgu = false;

  // Variant actually used by the attention stage.
  AttentionVariant effective_attention() const {
    return asga ? attention : AttentionVariant::kSoftmaxBaseline;
  }
  bool operator==(const AblationConfig&) const = default;
};

// Names: baseline, +asga, +gcqc, +cgdf, full, softmax, naive-sigmoid,
// no-pafs, no-qgg, asga, cgdf-minimalist, cgdf-full, cgdf-purified.
// Throws std::invalid_argument listing the valid names.
AblationConfig AblationPreset(const std::string& name);
const std::vector<std::string>& AblationPresetNames();
nlohmann::json AblationToJson(const AblationConfig& config);
AblationConfig AblationFromJson(const nlohmann::json& json);

// Test hooks that pin internal quantities.
struct ForwardHooks {
  // Every attention gate logit replaced by this value.
  std::optional<double> attention_gate_logit;
  // Attention heads ungated (sigmoid(G) = 1).
  bool open_attention_gates = false;
  // Sifters replaced by the identity.
  bool identity_sifters = false;
  // Calibration gate z pinned to this value.
  std::optional<double> calibration_gate;
  // Fusion logits or weights pinned.
  std::optional<std::array<double, 3>> view_logits;
  std::optional<std::array<double, 3>> view_weights;
};

struct ModelParams {
  ModelConfig config;
  FusionContext fusion_context = FusionContext::kPurified;

  Tensor user_embedding;     // [n_users, d]
  Tensor item_embedding;     // [n_items, d]
  Tensor context_embedding;  // [n_contexts, d]
  SwiGluFfn target_sifter;   // unused with share_target_sifter
  // One entry when shared, otherwise rt, st, lt.
  std::vector<SwiGluFfn> sequence_sifters;
  CascadeParams cascade;
  FusionParams fusion;
  Mlp head;  // [3d + 3d] -> head_hidden -> 1

  static ModelParams Initialize(const ModelConfig& config,
                                FusionContext fusion_context,
                                std::uint64_t seed);

  // Every learnable tensor under a stable dotted path, e.g. "fusion.w_logit".
  // Shared tensors are listed once.
  ParamList NamedParams() const;
  // Deep copy; sharing between views is preserved.
  ModelParams Clone() const;
  std::size_t NumScalars() const;
};

// Instances gathered into padded, masked tensors. Sequence views index the
// sorted list of distinct items referenced by the batch.
struct Batch {
  std::size_t size = 0;
  std::vector<std::size_t> users;
  std::vector<std::size_t> contexts;
  std::vector<std::size_t> targets;
  std::vector<double> labels;
  std::vector<std::size_t> items;
  SequenceView realtime;
  SequenceView short_term;
  SequenceView long_term;
};

// Throws DataError naming the field of any out-of-vocabulary id.
Batch MakeBatch(std::span<const Instance> instances, const Vocabulary& vocab);

struct ForwardResult {
  Tensor probabilities;  // [B]
  Tensor logits;         // [B], before clamping
  Tensor sifted_target;  // [B, d]
  CascadeOutput cascade;
  std::optional<FusionOutput> fusion;
};

ForwardResult Forward(const ModelParams& params, const AblationConfig& ablation,
                      const Batch& batch, const ForwardHooks& hooks = {});

// -mean(y log p + (1 - y) log(1 - p)) with p clamped to [1e-7, 1 - 1e-7].
Tensor BinaryCrossEntropy(const Tensor& probabilities,
                          std::span<const double> labels);

// Scores without recording gradients.
std::vector<double> Predict(const ModelParams& params,
                            const AblationConfig& ablation,
                            std::span<const Instance> instances,
                            std::size_t batch_size = 512,
                            const ForwardHooks& hooks = {});

}  // namespace gatedctr

#endif  // GATEDCTR_MODEL_H_
