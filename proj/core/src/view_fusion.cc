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

#include "gatedctr/view_fusion.h"

#include <stdexcept>
#include <vector>

namespace gatedctr {

const char* FusionContextName(FusionContext context) {
  switch (context) {
    case FusionContext::kMinimalist: return "minimalist";
    case FusionContext::kFull: return "full";
    case FusionContext::kPurified: return "purified";
  }
  return "unknown";
}

FusionContext ParseFusionContext(const std::string& name) {
  if (name == "minimalist") return FusionContext::kMinimalist;
  if (name == "full") return FusionContext::kFull;
  if (name == "purified") return FusionContext::kPurified;
  throw std::invalid_argument("unknown fusion context '" + name +
                              "' (expected minimalist, full or purified)");
}

std::size_t AnchorWidthInDims(FusionContext context) {
  switch (context) {
    case FusionContext::kMinimalist: return 4;
    case FusionContext::kFull: return 6;
    case FusionContext::kPurified: return 5;
  }
  return 0;
}

FusionParams FusionParams::Create(std::size_t dim, FusionContext context,
                                  std::size_t hidden, std::size_t gate_dim,
                                  std::size_t purifier_width, Rng& rng) {
  if (hidden == 0) hidden = 2 * dim;
  if (gate_dim == 0) gate_dim = dim;
  const std::size_t anchor = AnchorWidthInDims(context) * dim;
  FusionParams p;
  p.context = context;
  if (context == FusionContext::kPurified) {
    p.purifier = SwiGluFfn::Create(anchor, anchor, purifier_width, rng);
  }
  p.gate_mlp = Mlp::Create({anchor, hidden, gate_dim}, rng);
  p.w_logit = XavierUniform({gate_dim, 3}, gate_dim, 3, rng);
  return p;
}

void FusionParams::CollectParams(const std::string& prefix,
                                 ParamList& out) const {
  if (context == FusionContext::kPurified) {
    purifier.CollectParams(prefix + ".purifier", out);
  }
  gate_mlp.CollectParams(prefix + ".gate_mlp", out);
  out.emplace_back(prefix + ".w_logit", w_logit);
}

FusionParams FusionParams::Clone() const {
  FusionParams copy;
  copy.context = context;
  if (context == FusionContext::kPurified) copy.purifier = purifier.Clone();
  copy.gate_mlp = gate_mlp.Clone();
  copy.w_logit = w_logit.Clone();
  return copy;
}

Tensor HardConcat(const Tensor& realtime, const Tensor& short_term,
                  const Tensor& long_term) {
  return Concat({realtime, short_term, long_term});
}

FusionOutput FuseViews(const FusionParams& params, const FusionInputs& inputs,
                       const FusionOptions& options) {
  const std::size_t batch = inputs.realtime.dim(0);
  FusionOutput out;
  if (options.forced_weights) {
    std::vector<double> w;
    for (std::size_t b = 0; b < batch; ++b) {
      w.insert(w.end(), options.forced_weights->begin(),
               options.forced_weights->end());
    }
    out.weights = Tensor::FromData({batch, 3}, std::move(w));
  } else {
    Tensor logits;
    if (options.forced_logits) {
      std::vector<double> l;
      for (std::size_t b = 0; b < batch; ++b) {
        l.insert(l.end(), options.forced_logits->begin(),
                 options.forced_logits->end());
      }
      logits = Tensor::FromData({batch, 3}, std::move(l));
    } else {
      Tensor anchor;
      switch (params.context) {
        case FusionContext::kMinimalist:
          anchor = Concat({inputs.target, inputs.realtime, inputs.short_term,
                           inputs.long_term});
          break;
        case FusionContext::kFull:
          anchor = Concat({inputs.target, inputs.user, inputs.context,
                           inputs.realtime, inputs.short_term,
                           inputs.long_term});
          break;
        case FusionContext::kPurified:
          anchor = SwiGluForward(
              params.purifier,
              Concat({inputs.target, inputs.context, inputs.realtime,
                      inputs.short_term, inputs.long_term}));
          break;
      }
      if (anchor.shape().back() != params.gate_mlp.in_dim()) {
        throw ShapeError("FuseViews: anchor " + ShapeToString(anchor.shape()) +
                         " does not match gate MLP input " +
                         std::to_string(params.gate_mlp.in_dim()));
      }
      logits = MatMul(MlpForward(params.gate_mlp, anchor), params.w_logit);
    }
    out.weights = Softmax(logits);
  }
  out.fused = Concat(
      {ScaleLastDim(inputs.realtime, Slice(out.weights, 0, 1)),
       ScaleLastDim(inputs.short_term, Slice(out.weights, 1, 1)),
       ScaleLastDim(inputs.long_term, Slice(out.weights, 2, 1))});
  return out;
}

}  // namespace gatedctr
