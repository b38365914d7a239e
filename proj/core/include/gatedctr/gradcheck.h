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

// Central finite-difference verification of Tape::Backward().

#ifndef GATEDCTR_GRADCHECK_H_
#define GATEDCTR_GRADCHECK_H_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "gatedctr/tensor.h"

namespace gatedctr {

using NamedTensor = std::pair<std::string, Tensor>;

struct GradCheckOptions {
  double step = 1e-5;
  double tolerance = 1e-4;
  // Denominator floor of the relative error, so entries whose true gradient
  // is zero are judged on absolute error.
  double denominator_floor = 1e-6;
  // 0 checks every entry; otherwise a seeded sample of this many per tensor.
  std::size_t max_entries_per_tensor = 0;
  std::uint64_t seed = 0;
};

struct TensorCheckResult {
  std::string path;
  std::size_t entries_checked = 0;
  double max_relative_error = 0.0;
  std::size_t worst_entry = 0;
  double analytic_at_worst = 0.0;
  double numeric_at_worst = 0.0;
  bool passed = true;
};

// |analytic - numeric| / max(|analytic|, |numeric|, floor).
double RelativeError(double analytic, double numeric, double floor);

// Compares backward() against (f(x+h) - f(x-h)) / 2h for the listed tensors.
// loss_fn must rebuild the graph from the tensors' current values on every
// call and return a one-element tensor.
std::vector<TensorCheckResult> CheckGradients(
    const std::function<Tensor()>& loss_fn,
    const std::vector<NamedTensor>& tensors,
    const GradCheckOptions& options = {});

}  // namespace gatedctr

#endif  // GATEDCTR_GRADCHECK_H_
