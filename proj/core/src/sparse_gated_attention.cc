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

#include "gatedctr/sparse_gated_attention.h"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace gatedctr {
namespace {

// Added to the scores of padded positions before the softmax.
constexpr double kMaskedScore = -1e9;

}  // namespace

AttentionParams AttentionParams::Create(std::size_t dim, std::size_t num_heads,
                                        std::size_t head_dim, Rng& rng) {
  if (dim == 0 || num_heads == 0 || head_dim == 0) {
    throw std::invalid_argument("AttentionParams: dims must be positive");
  }
  const std::size_t inner = num_heads * head_dim;
  AttentionParams p;
  p.num_heads = num_heads;
  p.head_dim = head_dim;
  p.w_query = XavierUniform({dim, 2 * inner}, dim, 2 * inner, rng);
  p.w_key = XavierUniform({dim, inner}, dim, inner, rng);
  p.w_value = XavierUniform({dim, inner}, dim, inner, rng);
  p.w_out = XavierUniform({inner, dim}, inner, dim, rng);
  return p;
}

void AttentionParams::CollectParams(const std::string& prefix,
                                    ParamList& out) const {
  out.emplace_back(prefix + ".w_query", w_query);
  out.emplace_back(prefix + ".w_key", w_key);
  out.emplace_back(prefix + ".w_value", w_value);
  out.emplace_back(prefix + ".w_out", w_out);
}

AttentionParams AttentionParams::Clone() const {
  return {num_heads,       head_dim,        w_query.Clone(),
          w_key.Clone(),   w_value.Clone(), w_out.Clone()};
}

SequenceView SequenceView::FromRows(
    const std::vector<std::vector<std::size_t>>& rows) {
  SequenceView view;
  view.batch = rows.size();
  for (const auto& r : rows) view.length = std::max(view.length, r.size());
  view.ids.assign(view.batch * view.length, 0);
  view.mask.assign(view.batch * view.length, 0.0);
  for (std::size_t b = 0; b < rows.size(); ++b) {
    for (std::size_t t = 0; t < rows[b].size(); ++t) {
      view.ids[b * view.length + t] = rows[b][t];
      view.mask[b * view.length + t] = 1.0;
    }
  }
  return view;
}

AttentionOutput GatedTargetAttention(const AttentionParams& params,
                                     const Tensor& query,
                                     const Tensor& item_table,
                                     const SequenceView& view,
                                     const AttentionOptions& options) {
  const std::size_t d = params.model_dim();
  if (query.rank() != 2 || query.dim(1) != d) {
    throw ShapeError("GatedTargetAttention: query " +
                     ShapeToString(query.shape()) + " but model dim is " +
                     std::to_string(d));
  }
  const std::size_t batch = query.dim(0);
  if (view.batch != batch || view.ids.size() != batch * view.length ||
      view.mask.size() != view.ids.size()) {
    throw ShapeError("GatedTargetAttention: sequence view does not match " +
                     std::to_string(batch) + " queries");
  }
  const std::size_t heads = params.num_heads;
  const std::size_t dk = params.head_dim;
  const std::size_t len = view.length;

  const Tensor projected = MatMul(query, params.w_query);
  std::vector<Tensor> gates;
  std::vector<double> gate_diag;
  gate_diag.reserve(batch * heads * dk);
  for (std::size_t h = 0; h < heads; ++h) {
    Tensor g;
    if (!options.output_gate) {
      g = Tensor::Full({batch, dk}, 1.0);
    } else if (options.gate_logit_override) {
      g = Sigmoid(Tensor::Full({batch, dk}, *options.gate_logit_override));
    } else {
      g = Sigmoid(Slice(projected, 2 * h * dk + dk, dk));
    }
    gates.push_back(g);
  }
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t h = 0; h < heads; ++h) {
      const auto gd = gates[h].data();
      gate_diag.insert(gate_diag.end(), gd.begin() + b * dk,
                       gd.begin() + (b + 1) * dk);
    }
  }

  AttentionOutput out;
  out.gates = Tensor::FromData({batch, heads, dk}, std::move(gate_diag));
  if (len == 0) {
    out.pooled = Tensor::Zeros({batch, d});
    out.weights = Tensor::Zeros({batch, heads, 0});
    return out;
  }
  if (item_table.rank() != 2 || item_table.dim(1) != d) {
    throw ShapeError("GatedTargetAttention: item table " +
                     ShapeToString(item_table.shape()) +
                     " but model dim is " + std::to_string(d));
  }

  const Tensor keys =
      GatherRows(MatMul(item_table, params.w_key), view.ids, {batch, len});
  const Tensor values =
      GatherRows(MatMul(item_table, params.w_value), view.ids, {batch, len});
  const Tensor mask = Tensor::FromData({batch, len}, view.mask);
  std::vector<double> bias(view.mask.size());
  for (std::size_t i = 0; i < bias.size(); ++i) {
    bias[i] = view.mask[i] > 0.0 ? 0.0 : kMaskedScore;
  }
  const Tensor score_bias = Tensor::FromData({batch, len}, std::move(bias));
  const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(dk));

  std::vector<Tensor> head_outputs;
  std::vector<Tensor> head_weights;
  for (std::size_t h = 0; h < heads; ++h) {
    const Tensor q = Reshape(Slice(projected, 2 * h * dk, dk), {batch, 1, dk});
    const Tensor k = Slice(keys, h * dk, dk);
    const Tensor v = Slice(values, h * dk, dk);
    const Tensor scores =
        Scale(Reshape(BatchMatMul(q, k, /*transpose_b=*/true), {batch, len}),
              inv_sqrt_dk);
    Tensor w;
    if (options.normalization == AttentionNormalization::kSoftmax) {
      w = Mul(Softmax(Add(scores, score_bias)), mask);
    } else {
      w = Mul(Sigmoid(scores), mask);
    }
    Tensor att =
        Reshape(BatchMatMul(Reshape(w, {batch, 1, len}), v), {batch, dk});
    if (options.output_gate) att = Mul(att, gates[h]);
    head_outputs.push_back(att);
    head_weights.push_back(w);
  }
  out.pooled = MatMul(Concat(head_outputs), params.w_out);

  std::vector<double> weight_diag;
  weight_diag.reserve(batch * heads * len);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t h = 0; h < heads; ++h) {
      const auto wd = head_weights[h].data();
      weight_diag.insert(weight_diag.end(), wd.begin() + b * len,
                         wd.begin() + (b + 1) * len);
    }
  }
  out.weights = Tensor::FromData({batch, heads, len}, std::move(weight_diag));
  return out;
}

AttentionOutput AttendSequence(const AttentionParams& params,
                               const Tensor& query, const Tensor& sequence,
                               const std::vector<bool>& mask,
                               const AttentionOptions& options) {
  const std::size_t d = params.model_dim();
  if (query.rank() != 1 || query.dim(0) != d) {
    throw ShapeError("AttendSequence: query " + ShapeToString(query.shape()) +
                     " but model dim is " + std::to_string(d));
  }
  const std::size_t len = sequence.defined() ? sequence.dim(0) : 0;
  if (mask.size() != len) {
    throw ShapeError("AttendSequence: mask length " +
                     std::to_string(mask.size()) + " for " +
                     std::to_string(len) + " items");
  }
  if (len > 0 && (sequence.rank() != 2 || sequence.dim(1) != d)) {
    throw ShapeError("AttendSequence: sequence " +
                     ShapeToString(sequence.shape()) + " but model dim is " +
                     std::to_string(d));
  }
  SequenceView view;
  view.batch = 1;
  view.length = len;
  view.ids.resize(len);
  std::iota(view.ids.begin(), view.ids.end(), 0);
  for (bool m : mask) view.mask.push_back(m ? 1.0 : 0.0);

  AttentionOutput out = GatedTargetAttention(params, Reshape(query, {1, d}),
                                             sequence, view, options);
  out.pooled = Reshape(out.pooled, {d});
  out.weights = Reshape(out.weights, {params.num_heads, len});
  out.gates = Reshape(out.gates, {params.num_heads, params.head_dim});
  return out;
}

AttentionOutput SiftAndAttend(const AttentionParams& params,
                              const SwiGluFfn& target_sifter,
                              const SwiGluFfn& sequence_sifter,
                              const Tensor& target, const Tensor& sequence,
                              const std::vector<bool>& mask,
                              const AttentionOptions& options) {
  const Tensor sifted_target = SwiGluForward(target_sifter, target);
  const Tensor sifted_sequence = sequence.defined() && sequence.size() > 0
                                     ? SwiGluForward(sequence_sifter, sequence)
                                     : Tensor();
  return AttendSequence(params, sifted_target, sifted_sequence, mask, options);
}

}  // namespace gatedctr
