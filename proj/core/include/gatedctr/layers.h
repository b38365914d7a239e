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

// Parameterized building blocks: affine layers, Swish MLPs and the gated
// feed-forward (SwiGLU) block used for feature sifting and context
// purification.

#ifndef GATEDCTR_LAYERS_H_
#define GATEDCTR_LAYERS_H_

#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "gatedctr/gradcheck.h"
#include "gatedctr/tensor.h"

namespace gatedctr {

using Rng = std::mt19937_64;
using ParamList = std::vector<NamedTensor>;

// Uniform in [-a, a] with a = sqrt(6 / (fan_in + fan_out)).
Tensor XavierUniform(const Shape& shape, std::size_t fan_in,
                     std::size_t fan_out, Rng& rng);
Tensor XavierUniform(const Shape& shape, std::size_t fan_in,
                     std::size_t fan_out, std::uint64_t seed);
double XavierBound(std::size_t fan_in, std::size_t fan_out);

// Smallest power of two >= 2 * input_dim.
std::size_t DefaultExpansionWidth(std::size_t input_dim);

struct LinearLayer {
  Tensor weight;  // [in, out]
  Tensor bias;    // [out]

  static LinearLayer Create(std::size_t in, std::size_t out, Rng& rng);
  std::size_t in_dim() const { return weight.dim(0); }
  std::size_t out_dim() const { return weight.dim(1); }
  void CollectParams(const std::string& prefix, ParamList& out) const;
  LinearLayer Clone() const;
};

// x: [..., in] -> x W + b.
Tensor LinearForward(const LinearLayer& layer, const Tensor& x);

// (Swish(x W_g + b_g) * (x W_u + b_u)) W_d + b_d
struct SwiGluFfn {
  LinearLayer gate;
  LinearLayer up;
  LinearLayer down;

  // expansion == 0 selects DefaultExpansionWidth(in).
  static SwiGluFfn Create(std::size_t in, std::size_t out,
                          std::size_t expansion, Rng& rng);
  std::size_t in_dim() const { return gate.in_dim(); }
  std::size_t out_dim() const { return down.out_dim(); }
  std::size_t expansion() const { return gate.out_dim(); }
  void CollectParams(const std::string& prefix, ParamList& out) const;
  SwiGluFfn Clone() const;
};

Tensor SwiGluForward(const SwiGluFfn& ffn, const Tensor& x);

// Affine layers with Swish between consecutive layers; the last layer is
// left linear.
struct Mlp {
  std::vector<LinearLayer> layers;

  // dims = {in, hidden..., out}.
  static Mlp Create(const std::vector<std::size_t>& dims, Rng& rng);
  std::size_t in_dim() const { return layers.front().in_dim(); }
  std::size_t out_dim() const { return layers.back().out_dim(); }
  void CollectParams(const std::string& prefix, ParamList& out) const;
  Mlp Clone() const;
};

Tensor MlpForward(const Mlp& mlp, const Tensor& x);

}  // namespace gatedctr

#endif  // GATEDCTR_LAYERS_H_
