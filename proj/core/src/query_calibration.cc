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

#include "gatedctr/query_calibration.h"

namespace gatedctr {

CalibrationGateParams CalibrationGateParams::Create(std::size_t dim, Rng& rng) {
  CalibrationGateParams p;
  p.weight = XavierUniform({2 * dim, dim}, 2 * dim, dim, rng);
  p.bias = Tensor::Zeros({dim});
  p.bias.set_requires_grad(true);
  return p;
}

void CalibrationGateParams::CollectParams(const std::string& prefix,
                                          ParamList& out) const {
  out.emplace_back(prefix + ".weight", weight);
  out.emplace_back(prefix + ".bias", bias);
}

CalibrationGateParams CalibrationGateParams::Clone() const {
  return {weight.Clone(), bias.Clone()};
}

CalibratedQuery CalibrateQuery(const CalibrationGateParams& params,
                               const Tensor& q, const Tensor& h,
                               std::optional<double> forced_gate) {
  if (q.shape() != h.shape() || q.rank() < 1 ||
      q.shape().back() != params.dim()) {
    throw ShapeError("CalibrateQuery: query " + ShapeToString(q.shape()) +
                     ", context " + ShapeToString(h.shape()) +
                     ", gate dim " + std::to_string(params.dim()));
  }
  CalibratedQuery out;
  if (forced_gate) {
    out.gate = Tensor::Full(q.shape(), *forced_gate);
  } else {
    out.gate = Sigmoid(
        AddBias(MatMul(Concat({q, h}), params.weight), params.bias));
  }
  const Tensor keep = AddScalar(Scale(out.gate, -1.0), 1.0);
  out.query = Add(Mul(keep, q), Mul(out.gate, h));
  return out;
}

CascadeOutput RunQueryCascade(const CascadeParams& params, const Tensor& query,
                              const Tensor& realtime_table,
                              const Tensor& short_term_table,
                              const Tensor& long_term_table,
                              const CascadeViews& views,
                              const CascadeOptions& options) {
  if (views.realtime == nullptr || views.short_term == nullptr ||
      views.long_term == nullptr) {
    throw std::invalid_argument("RunQueryCascade: all three views required");
  }
  CascadeOutput out;
  out.base_query = query;
  out.realtime_attention =
      GatedTargetAttention(params.realtime, query, realtime_table,
                           *views.realtime, options.attention);
  out.realtime = out.realtime_attention.pooled;

  Tensor retrieval_query = query;
  if (options.calibrate) {
    CalibratedQuery calibrated = CalibrateQuery(
        params.update_gate, query, out.realtime, options.forced_gate);
    retrieval_query = calibrated.query;
    out.update_gate = calibrated.gate;
  }
  out.calibrated_query = retrieval_query;

  out.short_term_attention =
      GatedTargetAttention(params.short_term, retrieval_query,
                           short_term_table, *views.short_term,
                           options.attention);
  out.short_term = out.short_term_attention.pooled;

  Tensor long_term_query = retrieval_query;
  if (options.calibrate && options.second_gate) {
    long_term_query =
        CalibrateQuery(params.refine_gate, retrieval_query, out.short_term)
            .query;
  }
  out.long_term_attention =
      GatedTargetAttention(params.long_term, long_term_query, long_term_table,
                           *views.long_term, options.attention);
  out.long_term = out.long_term_attention.pooled;
  return out;
}

}  // namespace gatedctr
