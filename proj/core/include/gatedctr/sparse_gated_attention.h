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

// Multi-head target attention with a query-derived output gate.
//
// The query projection is twice as wide as the key projection. For head h,
// columns [2h*dk, 2h*dk + dk) of (query * W_Q) form the attention query and
// the following dk columns form gate logits G. The head output is
//
//   softmax(q K^T / sqrt(dk)) V  (elementwise)  sigmoid(G)
//
// so a head can shut off its retrieved history entirely, which a sum-to-one
// softmax alone cannot do. Heads are concatenated and mapped back to d by
// W_O. There is no positional encoding: the pooled output is invariant to
// permutations of the sequence.
//
// Sequences are supplied as row indices into a shared item table so that a
// batch whose instances reference the same items projects each item once.

#ifndef GATEDCTR_SPARSE_GATED_ATTENTION_H_
#define GATEDCTR_SPARSE_GATED_ATTENTION_H_

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "gatedctr/layers.h"
#include "gatedctr/tensor.h"

namespace gatedctr {

struct AttentionParams {
  std::size_t num_heads = 0;
  std::size_t head_dim = 0;
  Tensor w_query;  // [d, 2 * H * dk]
  Tensor w_key;    // [d, H * dk]
  Tensor w_value;  // [d, H * dk]
  Tensor w_out;    // [H * dk, d]

  static AttentionParams Create(std::size_t dim, std::size_t num_heads,
                                std::size_t head_dim, Rng& rng);
  std::size_t model_dim() const { return w_key.dim(0); }
  void CollectParams(const std::string& prefix, ParamList& out) const;
  AttentionParams Clone() const;
};

enum class AttentionNormalization {
  kSoftmax,
  // Elementwise sigmoid of the scores, no competition between positions.
  kSigmoid,
};

struct AttentionOptions {
  AttentionNormalization normalization = AttentionNormalization::kSoftmax;
  // When false the head outputs are not gated (equivalent to sigmoid(G)=1).
  bool output_gate = true;
  // Replaces every gate logit with this constant.
  std::optional<double> gate_logit_override;
};

// Padded, masked index view of one behavior sequence per batch row.
struct SequenceView {
  std::size_t batch = 0;
  std::size_t length = 0;        // padded length T
  std::vector<std::size_t> ids;  // [batch * length], rows of the item table
  std::vector<double> mask;      // [batch * length], 1 valid / 0 padding

  // Builds a view from per-row id lists; ids are used unchanged.
  static SequenceView FromRows(
      const std::vector<std::vector<std::size_t>>& rows);
};

struct AttentionOutput {
  Tensor pooled;   // [B, d]
  Tensor weights;  // [B, H, T], detached; zero at masked positions
  Tensor gates;    // [B, H, dk], detached sigmoid(G); ones when ungated
};

// query: [B, d]; item_table: [U, d].
AttentionOutput GatedTargetAttention(const AttentionParams& params,
                                     const Tensor& query,
                                     const Tensor& item_table,
                                     const SequenceView& view,
                                     const AttentionOptions& options = {});

// Single-instance form. query: [d]; sequence: [L, d] (undefined when L = 0);
// outputs drop the batch dimension.
AttentionOutput AttendSequence(const AttentionParams& params,
                               const Tensor& query, const Tensor& sequence,
                               const std::vector<bool>& mask,
                               const AttentionOptions& options = {});

// Sifts the raw target and sequence embeddings, then attends.
AttentionOutput SiftAndAttend(const AttentionParams& params,
                              const SwiGluFfn& target_sifter,
                              const SwiGluFfn& sequence_sifter,
                              const Tensor& target, const Tensor& sequence,
                              const std::vector<bool>& mask,
                              const AttentionOptions& options = {});

}  // namespace gatedctr

#endif  // GATEDCTR_SPARSE_GATED_ATTENTION_H_
