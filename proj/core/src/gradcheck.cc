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

#include "gatedctr/gradcheck.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace gatedctr {

double RelativeError(double analytic, double numeric, double floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

std::vector<TensorCheckResult> CheckGradients(
    const std::function<Tensor()>& loss_fn,
    const std::vector<NamedTensor>& tensors,
    const GradCheckOptions& options) {
  std::vector<std::vector<double>> analytic;
  {
    for (const auto& [name, t] : tensors) Tensor(t).ZeroGrad();
    Tape tape;
    Tensor loss = loss_fn();
    tape.Backward(loss);
    for (const auto& [name, t] : tensors) analytic.push_back(t.grad());
  }

  auto evaluate = [&] {
    NoGradScope no_grad;
    return loss_fn().item();
  };

  std::mt19937_64 rng(options.seed);
  std::vector<TensorCheckResult> results;
  for (std::size_t k = 0; k < tensors.size(); ++k) {
    Tensor t = tensors[k].second;
    TensorCheckResult r;
    r.path = tensors[k].first;

    std::vector<std::size_t> entries(t.size());
    std::iota(entries.begin(), entries.end(), 0);
    if (options.max_entries_per_tensor > 0 &&
        entries.size() > options.max_entries_per_tensor) {
      std::shuffle(entries.begin(), entries.end(), rng);
      entries.resize(options.max_entries_per_tensor);
      std::sort(entries.begin(), entries.end());
    }

    auto values = t.mutable_data();
    for (std::size_t i : entries) {
      const double original = values[i];
      values[i] = original + options.step;
      const double plus = evaluate();
      values[i] = original - options.step;
      const double minus = evaluate();
      values[i] = original;
      const double numeric = (plus - minus) / (2.0 * options.step);
      const double err =
          RelativeError(analytic[k][i], numeric, options.denominator_floor);
      if (err > r.max_relative_error || r.entries_checked == 0) {
        r.max_relative_error = err;
        r.worst_entry = i;
        r.analytic_at_worst = analytic[k][i];
        r.numeric_at_worst = numeric;
      }
      ++r.entries_checked;
    }
    r.passed = r.max_relative_error < options.tolerance;
    results.push_back(std::move(r));
  }
  return results;
}

}  // namespace gatedctr
