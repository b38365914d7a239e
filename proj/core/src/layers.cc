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

#include "gatedctr/layers.h"

#include <cmath>
#include <stdexcept>

namespace gatedctr {

double XavierBound(std::size_t fan_in, std::size_t fan_out) {
  if (fan_in == 0 || fan_out == 0) {
    throw std::invalid_argument("XavierBound: fans must be positive");
  }
  return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

Tensor XavierUniform(const Shape& shape, std::size_t fan_in,
                     std::size_t fan_out, Rng& rng) {
  const double bound = XavierBound(fan_in, fan_out);
  std::uniform_real_distribution<double> dist(-bound, bound);
  std::vector<double> values(NumElements(shape));
  for (double& v : values) v = dist(rng);
  Tensor t = Tensor::FromData(shape, std::move(values));
  t.set_requires_grad(true);
  return t;
}

Tensor XavierUniform(const Shape& shape, std::size_t fan_in,
                     std::size_t fan_out, std::uint64_t seed) {
  Rng rng(seed);
  return XavierUniform(shape, fan_in, fan_out, rng);
}

std::size_t DefaultExpansionWidth(std::size_t input_dim) {
  std::size_t width = 1;
  while (width < 2 * input_dim) width <<= 1;
  return width;
}

// ---------------------------------------------------------------------------

LinearLayer LinearLayer::Create(std::size_t in, std::size_t out, Rng& rng) {
  LinearLayer layer;
  layer.weight = XavierUniform({in, out}, in, out, rng);
  layer.bias = Tensor::Zeros({out});
  layer.bias.set_requires_grad(true);
  return layer;
}

void LinearLayer::CollectParams(const std::string& prefix,
                                ParamList& out) const {
  out.emplace_back(prefix + ".weight", weight);
  out.emplace_back(prefix + ".bias", bias);
}

LinearLayer LinearLayer::Clone() const { return {weight.Clone(), bias.Clone()}; }

Tensor LinearForward(const LinearLayer& layer, const Tensor& x) {
  if (x.rank() < 1 || x.shape().back() != layer.in_dim()) {
    throw ShapeError("LinearForward: input " + ShapeToString(x.shape()) +
                     " does not match layer " +
                     ShapeToString(layer.weight.shape()));
  }
  return AddBias(MatMul(x, layer.weight), layer.bias);
}

// ---------------------------------------------------------------------------

SwiGluFfn SwiGluFfn::Create(std::size_t in, std::size_t out,
                            std::size_t expansion, Rng& rng) {
  if (expansion == 0) expansion = DefaultExpansionWidth(in);
  SwiGluFfn ffn;
  ffn.gate = LinearLayer::Create(in, expansion, rng);
  ffn.up = LinearLayer::Create(in, expansion, rng);
  ffn.down = LinearLayer::Create(expansion, out, rng);
  return ffn;
}

void SwiGluFfn::CollectParams(const std::string& prefix, ParamList& out) const {
  gate.CollectParams(prefix + ".gate", out);
  up.CollectParams(prefix + ".up", out);
  down.CollectParams(prefix + ".down", out);
}

SwiGluFfn SwiGluFfn::Clone() const {
  return {gate.Clone(), up.Clone(), down.Clone()};
}

Tensor SwiGluForward(const SwiGluFfn& ffn, const Tensor& x) {
  if (x.rank() < 1 || x.shape().back() != ffn.in_dim()) {
    throw ShapeError("SwiGluForward: input " + ShapeToString(x.shape()) +
                     " does not match d_in " + std::to_string(ffn.in_dim()));
  }
  const Tensor gated = Swish(LinearForward(ffn.gate, x));
  const Tensor up = LinearForward(ffn.up, x);
  return LinearForward(ffn.down, Mul(gated, up));
}

// ---------------------------------------------------------------------------

Mlp Mlp::Create(const std::vector<std::size_t>& dims, Rng& rng) {
  if (dims.size() < 2) {
    throw std::invalid_argument("Mlp needs at least input and output dims");
  }
  Mlp mlp;
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    mlp.layers.push_back(LinearLayer::Create(dims[i], dims[i + 1], rng));
  }
  return mlp;
}

void Mlp::CollectParams(const std::string& prefix, ParamList& out) const {
  for (std::size_t i = 0; i < layers.size(); ++i) {
    layers[i].CollectParams(prefix + "." + std::to_string(i), out);
  }
}

Mlp Mlp::Clone() const {
  Mlp copy;
  for (const LinearLayer& l : layers) copy.layers.push_back(l.Clone());
  return copy;
}

Tensor MlpForward(const Mlp& mlp, const Tensor& x) {
  Tensor h = x;
  for (std::size_t i = 0; i < mlp.layers.size(); ++i) {
    h = LinearForward(mlp.layers[i], h);
    if (i + 1 < mlp.layers.size()) h = Swish(h);
  }
  return h;
}

}  // namespace gatedctr
