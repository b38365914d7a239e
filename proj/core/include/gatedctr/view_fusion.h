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

// Context-gated fusion of the three view representations.
//
// A decision anchor built from the target, context and view vectors is
// (optionally) purified by a SwiGLU block, projected by an MLP and mapped to
// three softmax weights alpha. The fused output is
//
//   concat(alpha_rt * H_rt, alpha_st * H_st, alpha_lt * H_lt)
//
// which keeps all 3d components; alpha only rescales whole segments.

#ifndef GATEDCTR_VIEW_FUSION_H_
#define GATEDCTR_VIEW_FUSION_H_

#include <array>
#include <optional>
#include <string>

#include "gatedctr/layers.h"
#include "gatedctr/tensor.h"

namespace gatedctr {

// Composition of the decision anchor.
enum class FusionContext {
  // concat(target, H_rt, H_st, H_lt), no purifier.
  kMinimalist,
  // concat(target, user, context, H_rt, H_st, H_lt), no purifier.
  kFull,
  // SwiGLU(concat(target, context, H_rt, H_st, H_lt)).
  kPurified,
};

const char* FusionContextName(FusionContext context);
FusionContext ParseFusionContext(const std::string& name);
// Anchor width in units of d.
std::size_t AnchorWidthInDims(FusionContext context);

struct FusionParams {
  FusionContext context = FusionContext::kPurified;
  SwiGluFfn purifier;  // only for kPurified
  Mlp gate_mlp;        // anchor -> hidden -> gate_dim
  Tensor w_logit;      // [gate_dim, 3]

  // hidden == 0 -> 2d; gate_dim == 0 -> d; purifier_width == 0 -> default.
  static FusionParams Create(std::size_t dim, FusionContext context,
                             std::size_t hidden, std::size_t gate_dim,
                             std::size_t purifier_width, Rng& rng);
  void CollectParams(const std::string& prefix, ParamList& out) const;
  FusionParams Clone() const;
};

struct FusionInputs {
  Tensor target;      // sifted target, [B, d]
  Tensor user;        // [B, d], read only by kFull
  Tensor context;     // [B, d]
  Tensor realtime;    // [B, d]
  Tensor short_term;  // [B, d]
  Tensor long_term;   // [B, d]
};

struct FusionOptions {
  // Replace h_gate * W_logit before the softmax.
  std::optional<std::array<double, 3>> forced_logits;
  // Replace alpha outright; need not sum to one.
  std::optional<std::array<double, 3>> forced_weights;
};

struct FusionOutput {
  Tensor fused;    // [B, 3d]
  Tensor weights;  // alpha, [B, 3]
};

FusionOutput FuseViews(const FusionParams& params, const FusionInputs& inputs,
                       const FusionOptions& options = {});

// concat(H_rt, H_st, H_lt) without weighting.
Tensor HardConcat(const Tensor& realtime, const Tensor& short_term,
                  const Tensor& long_term);

}  // namespace gatedctr

#endif  // GATEDCTR_VIEW_FUSION_H_
