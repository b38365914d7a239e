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

// Cascading query calibration across the real-time, short-term and
// long-term views.
//
//   H_rt = Attend(Q_0, rt)
//   z    = sigmoid([Q_0; H_rt] W_z + b_z)
//   Q_rt = (1 - z) * Q_0 + z * H_rt
//   H_st = Attend(Q_rt, st)
//   H_lt = Attend(Q_rt, lt)
//
// With calibration disabled every view is queried by Q_0 directly.

#ifndef GATEDCTR_QUERY_CALIBRATION_H_
#define GATEDCTR_QUERY_CALIBRATION_H_

#include <optional>
#include <string>

#include "gatedctr/layers.h"
#include "gatedctr/sparse_gated_attention.h"
#include "gatedctr/tensor.h"

namespace gatedctr {

struct CalibrationGateParams {
  Tensor weight;  // [2d, d]
  Tensor bias;    // [d]

  static CalibrationGateParams Create(std::size_t dim, Rng& rng);
  std::size_t dim() const { return bias.dim(0); }
  void CollectParams(const std::string& prefix, ParamList& out) const;
  CalibrationGateParams Clone() const;
};

struct CalibratedQuery {
  Tensor query;  // (1 - z) * q + z * h
  Tensor gate;   // z
};

// q, h: [..., d]. forced_gate replaces z with a constant.
CalibratedQuery CalibrateQuery(const CalibrationGateParams& params,
                               const Tensor& q, const Tensor& h,
                               std::optional<double> forced_gate = {});

struct CascadeParams {
  AttentionParams realtime;
  AttentionParams short_term;
  AttentionParams long_term;
  CalibrationGateParams update_gate;
  // Used only with CascadeOptions::second_gate.
  CalibrationGateParams refine_gate;
};

struct CascadeOptions {
  bool calibrate = true;
  // Refines Q_rt with H_st before the long-term stage.
  bool second_gate = false;
  std::optional<double> forced_gate;
  AttentionOptions attention;
};

struct CascadeViews {
  // Rows of item_table, one view each.
  const SequenceView* realtime = nullptr;
  const SequenceView* short_term = nullptr;
  const SequenceView* long_term = nullptr;
};

struct CascadeOutput {
  Tensor base_query;        // Q_0
  Tensor calibrated_query;  // Q_rt (Q_0 when calibration is off)
  Tensor realtime;          // H_rt
  Tensor short_term;        // H_st
  Tensor long_term;         // H_lt
  Tensor update_gate;       // z_1, undefined when calibration is off
  AttentionOutput realtime_attention;
  AttentionOutput short_term_attention;
  AttentionOutput long_term_attention;
};

// query: [B, d], already sifted. Each view reads rows of its own table so
// per-view sifters remain possible; the tables may be the same tensor.
CascadeOutput RunQueryCascade(const CascadeParams& params, const Tensor& query,
                              const Tensor& realtime_table,
                              const Tensor& short_term_table,
                              const Tensor& long_term_table,
                              const CascadeViews& views,
                              const CascadeOptions& options = {});

}  // namespace gatedctr

#endif  // GATEDCTR_QUERY_CALIBRATION_H_
