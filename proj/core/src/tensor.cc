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

#include "gatedctr/tensor.h"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <utility>

#include <Eigen/Core>

namespace gatedctr {
namespace {

using internal::TensorStorage;
using StoragePtr = std::shared_ptr<TensorStorage>;

thread_local Tape* active_tape = nullptr;
thread_local bool grad_disabled = false;

void RequireDefined(const Tensor& t, const char* op) {
  if (!t.defined()) {
    throw std::invalid_argument(std::string(op) + ": undefined tensor");
  }
}

std::span<double> GradBuffer(TensorStorage& s) {
  if (s.grad.empty()) s.grad.assign(s.data.size(), 0.0);
  return s.grad;
}

bool ShouldRecord(std::initializer_list<const Tensor*> inputs) {
  if (active_tape == nullptr || grad_disabled) return false;
  for (const Tensor* t : inputs) {
    if (t->requires_grad()) return true;
  }
  return false;
}

void RequireSameShape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " +
                     ShapeToString(a.shape()) + " vs " +
                     ShapeToString(b.shape()));
  }
}

// Output gradient of a recorded node; empty span if nothing reached it.
std::span<const double> OutGrad(const StoragePtr& out) { return out->grad; }

template <typename Forward, typename Derivative>
Tensor UnaryOp(const Tensor& x, const char* name, Forward forward,
               Derivative derivative) {
  RequireDefined(x, name);
  const auto in = x.data();
  std::vector<double> out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = forward(in[i]);
  Tensor result = MakeTensor(x.shape(), std::move(out));
  if (ShouldRecord({&x})) {
    StoragePtr xs = x.storage();
    StoragePtr os = result.storage();
    Tape::Active()->Record(result, {xs}, [xs, os, derivative] {
      auto g = OutGrad(os);
      auto gx = GradBuffer(*xs);
      for (std::size_t i = 0; i < g.size(); ++i) {
        gx[i] += g[i] * derivative(xs->data[i], os->data[i]);
      }
    });
  }
  return result;
}

double StableSigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace

std::size_t NumElements(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string ShapeToString(const Shape& shape) {
  std::ostringstream os;
  os << "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i > 0) os << ", ";
    os << shape[i];
  }
  os << ")";
  return os.str();
}

// ---------------------------------------------------------------------------
// Tensor

Tensor MakeTensor(Shape shape, std::vector<double> data) {
  if (NumElements(shape) != data.size()) {
    throw ShapeError("shape " + ShapeToString(shape) + " holds " +
                     std::to_string(NumElements(shape)) + " values, got " +
                     std::to_string(data.size()));
  }
  auto storage = std::make_shared<TensorStorage>();
  storage->shape = std::move(shape);
  storage->data = std::move(data);
  return Tensor(std::move(storage));
}

Tensor Tensor::Zeros(Shape shape) { return Full(std::move(shape), 0.0); }

Tensor Tensor::Full(Shape shape, double value) {
  const std::size_t n = NumElements(shape);
  return MakeTensor(std::move(shape), std::vector<double>(n, value));
}

Tensor Tensor::FromData(Shape shape, std::vector<double> data) {
  return MakeTensor(std::move(shape), std::move(data));
}

Tensor Tensor::Scalar(double value) { return MakeTensor({1}, {value}); }

const Shape& Tensor::shape() const {
  RequireDefined(*this, "shape");
  return storage_->shape;
}

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= rank()) {
    throw ShapeError("axis " + std::to_string(axis) + " out of range for " +
                     ShapeToString(shape()));
  }
  return storage_->shape[axis];
}

std::size_t Tensor::size() const {
  RequireDefined(*this, "size");
  return storage_->data.size();
}

std::span<const double> Tensor::data() const {
  RequireDefined(*this, "data");
  return storage_->data;
}

std::span<double> Tensor::mutable_data() {
  RequireDefined(*this, "mutable_data");
  return storage_->data;
}

double Tensor::item() const {
  if (size() != 1) {
    throw ShapeError("item() on tensor of shape " + ShapeToString(shape()));
  }
  return storage_->data[0];
}

bool Tensor::requires_grad() const {
  return storage_ != nullptr && storage_->requires_grad;
}

Tensor& Tensor::set_requires_grad(bool value) {
  RequireDefined(*this, "set_requires_grad");
  storage_->requires_grad = value;
  return *this;
}

bool Tensor::has_grad() const {
  return storage_ != nullptr && !storage_->grad.empty();
}

std::vector<double> Tensor::grad() const {
  RequireDefined(*this, "grad");
  if (storage_->grad.empty()) return std::vector<double>(size(), 0.0);
  return storage_->grad;
}

std::span<double> Tensor::mutable_grad() {
  RequireDefined(*this, "mutable_grad");
  return GradBuffer(*storage_);
}

void Tensor::ZeroGrad() {
  if (storage_ != nullptr) storage_->grad.clear();
}

Tensor Tensor::Clone() const {
  RequireDefined(*this, "Clone");
  Tensor copy = MakeTensor(storage_->shape, storage_->data);
  copy.storage_->requires_grad = storage_->requires_grad;
  return copy;
}

Tensor Tensor::Detach() const {
  RequireDefined(*this, "Detach");
  return MakeTensor(storage_->shape, storage_->data);
}

// ---------------------------------------------------------------------------
// Tape

Tape::Tape() : previous_(active_tape) { active_tape = this; }

Tape::~Tape() { active_tape = previous_; }

Tape* Tape::Active() { return grad_disabled ? nullptr : active_tape; }

void Tape::Record(const Tensor& output, std::vector<StoragePtr> inputs,
                  BackwardFn backward) {
  const StoragePtr& out = output.storage();
  out->requires_grad = true;
  out->tape = this;
  out->node = nodes_.size();
  nodes_.push_back({std::move(inputs), out, std::move(backward)});
}

void Tape::Backward(const Tensor& loss) {
  RequireDefined(loss, "Backward");
  if (loss.size() != 1) {
    throw ShapeError("Backward: loss must be scalar, got shape " +
                     ShapeToString(loss.shape()));
  }
  const StoragePtr& ls = loss.storage();
  if (ls->tape != this || ls->node >= nodes_.size() ||
      nodes_[ls->node].output != ls) {
    throw std::logic_error("Backward: loss was not recorded on this tape");
  }
  GradBuffer(*ls)[0] += 1.0;
  for (std::size_t i = ls->node + 1; i-- > 0;) {
    Node& node = nodes_[i];
    if (node.output->grad.empty()) continue;
    node.backward();
  }
}

NoGradScope::NoGradScope() : previous_(grad_disabled) { grad_disabled = true; }

NoGradScope::~NoGradScope() { grad_disabled = previous_; }

// ---------------------------------------------------------------------------
// Linear algebra

namespace {

using RowMajor =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMajor>;
using MutableMap = Eigen::Map<RowMajor>;

// c[rows x n] += a[rows x k] * b[k x n]
void GemmAccumulate(const double* a, const double* b, double* c,
                    std::size_t rows, std::size_t k, std::size_t n) {
  if (rows == 0 || k == 0 || n == 0) return;
  MutableMap(c, rows, n).noalias() +=
      ConstMap(a, rows, k) * ConstMap(b, k, n);
}

// c[rows x k] += a[rows x n] * b[k x n]^T
void GemmTransBAccumulate(const double* a, const double* b, double* c,
                          std::size_t rows, std::size_t n, std::size_t k) {
  if (rows == 0 || k == 0 || n == 0) return;
  MutableMap(c, rows, k).noalias() +=
      ConstMap(a, rows, n) * ConstMap(b, k, n).transpose();
}

// c[k x n] += a[rows x k]^T * b[rows x n]
void GemmTransAAccumulate(const double* a, const double* b, double* c,
                          std::size_t rows, std::size_t k, std::size_t n) {
  if (rows == 0 || k == 0 || n == 0) return;
  MutableMap(c, k, n).noalias() +=
      ConstMap(a, rows, k).transpose() * ConstMap(b, rows, n);
}

}  // namespace

Tensor MatMul(const Tensor& a, const Tensor& b) {
  RequireDefined(a, "MatMul");
  RequireDefined(b, "MatMul");
  if (b.rank() != 2 || a.rank() < 1 || a.shape().back() != b.dim(0)) {
    throw ShapeError("MatMul: cannot multiply " + ShapeToString(a.shape()) +
                     " by " + ShapeToString(b.shape()));
  }
  const std::size_t k = b.dim(0);
  const std::size_t n = b.dim(1);
  const std::size_t rows = a.size() / k;
  Shape out_shape = a.shape();
  out_shape.back() = n;
  std::vector<double> out(rows * n, 0.0);
  GemmAccumulate(a.data().data(), b.data().data(), out.data(), rows, k, n);
  Tensor result = MakeTensor(std::move(out_shape), std::move(out));
  if (ShouldRecord({&a, &b})) {
    StoragePtr as = a.storage(), bs = b.storage(), os = result.storage();
    Tape::Active()->Record(result, {as, bs}, [as, bs, os, rows, k, n] {
      const double* g = os->grad.data();
      if (as->requires_grad) {
        GemmTransBAccumulate(g, bs->data.data(), GradBuffer(*as).data(), rows,
                             n, k);
      }
      if (bs->requires_grad) {
        GemmTransAAccumulate(as->data.data(), g, GradBuffer(*bs).data(), rows,
                             k, n);
      }
    });
  }
  return result;
}

Tensor BatchMatMul(const Tensor& a, const Tensor& b, bool transpose_b) {
  RequireDefined(a, "BatchMatMul");
  RequireDefined(b, "BatchMatMul");
  const bool ranks_ok = a.rank() == 3 && b.rank() == 3 && a.dim(0) == b.dim(0);
  const std::size_t inner_b = ranks_ok ? b.dim(transpose_b ? 2 : 1) : 0;
  if (!ranks_ok || a.dim(2) != inner_b) {
    throw ShapeError("BatchMatMul: cannot multiply " +
                     ShapeToString(a.shape()) + " by " +
                     ShapeToString(b.shape()) +
                     (transpose_b ? " (transposed)" : ""));
  }
  const std::size_t batch = a.dim(0), m = a.dim(1), k = a.dim(2);
  const std::size_t n = transpose_b ? b.dim(1) : b.dim(2);
  std::vector<double> out(batch * m * n, 0.0);
  const double* ad = a.data().data();
  const double* bd = b.data().data();
  for (std::size_t s = 0; s < batch; ++s) {
    if (transpose_b) {
      GemmTransBAccumulate(ad + s * m * k, bd + s * n * k, out.data() + s * m * n,
                           m, k, n);
    } else {
      GemmAccumulate(ad + s * m * k, bd + s * k * n, out.data() + s * m * n, m,
                     k, n);
    }
  }
  Tensor result = MakeTensor({batch, m, n}, std::move(out));
  if (ShouldRecord({&a, &b})) {
    StoragePtr as = a.storage(), bs = b.storage(), os = result.storage();
    Tape::Active()->Record(
        result, {as, bs}, [as, bs, os, batch, m, k, n, transpose_b] {
          const double* g = os->grad.data();
          double* ga = as->requires_grad ? GradBuffer(*as).data() : nullptr;
          double* gb = bs->requires_grad ? GradBuffer(*bs).data() : nullptr;
          for (std::size_t s = 0; s < batch; ++s) {
            const double* gs = g + s * m * n;
            const double* as_s = as->data.data() + s * m * k;
            const double* bs_s = bs->data.data() + s * k * n;
            if (ga != nullptr) {
              if (transpose_b) {
                // dA = G * B, B stored [n x k].
                GemmAccumulate(gs, bs_s, ga + s * m * k, m, n, k);
              } else {
                GemmTransBAccumulate(gs, bs_s, ga + s * m * k, m, n, k);
              }
            }
            if (gb != nullptr) {
              if (transpose_b) {
                // dB[n x k] = G^T * A
                GemmTransAAccumulate(gs, as_s, gb + s * k * n, m, n, k);
              } else {
                GemmTransAAccumulate(as_s, gs, gb + s * k * n, m, k, n);
              }
            }
          }
        });
  }
  return result;
}

// ---------------------------------------------------------------------------
// Elementwise

namespace {

enum class BinaryKind { kAdd, kSub, kMul };

Tensor BinaryOp(const Tensor& a, const Tensor& b, BinaryKind kind,
                const char* name) {
  RequireDefined(a, name);
  RequireDefined(b, name);
  RequireSameShape(a, b, name);
  const auto ad = a.data();
  const auto bd = b.data();
  std::vector<double> out(ad.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    switch (kind) {
      case BinaryKind::kAdd: out[i] = ad[i] + bd[i]; break;
      case BinaryKind::kSub: out[i] = ad[i] - bd[i]; break;
      case BinaryKind::kMul: out[i] = ad[i] * bd[i]; break;
    }
  }
  Tensor result = MakeTensor(a.shape(), std::move(out));
  if (ShouldRecord({&a, &b})) {
    StoragePtr as = a.storage(), bs = b.storage(), os = result.storage();
    Tape::Active()->Record(result, {as, bs}, [as, bs, os, kind] {
      const auto g = OutGrad(os);
      if (as->requires_grad) {
        auto ga = GradBuffer(*as);
        for (std::size_t i = 0; i < g.size(); ++i) {
          ga[i] += kind == BinaryKind::kMul ? g[i] * bs->data[i] : g[i];
        }
      }
      if (bs->requires_grad) {
        auto gb = GradBuffer(*bs);
        for (std::size_t i = 0; i < g.size(); ++i) {
          switch (kind) {
            case BinaryKind::kAdd: gb[i] += g[i]; break;
            case BinaryKind::kSub: gb[i] -= g[i]; break;
            case BinaryKind::kMul: gb[i] += g[i] * as->data[i]; break;
          }
        }
      }
    });
  }
  return result;
}

}  // namespace

Tensor Add(const Tensor& a, const Tensor& b) {
  return BinaryOp(a, b, BinaryKind::kAdd, "Add");
}

Tensor Sub(const Tensor& a, const Tensor& b) {
  return BinaryOp(a, b, BinaryKind::kSub, "Sub");
}

Tensor Mul(const Tensor& a, const Tensor& b) {
  return BinaryOp(a, b, BinaryKind::kMul, "Mul");
}

Tensor AddBias(const Tensor& x, const Tensor& bias) {
  RequireDefined(x, "AddBias");
  RequireDefined(bias, "AddBias");
  if (bias.rank() != 1 || x.rank() < 1 || x.shape().back() != bias.dim(0)) {
    throw ShapeError("AddBias: cannot add bias " +
                     ShapeToString(bias.shape()) + " to " +
                     ShapeToString(x.shape()));
  }
  const std::size_t n = bias.dim(0);
  const auto xd = x.data();
  const auto bd = bias.data();
  std::vector<double> out(xd.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xd[i] + bd[i % n];
  Tensor result = MakeTensor(x.shape(), std::move(out));
  if (ShouldRecord({&x, &bias})) {
    StoragePtr xs = x.storage(), bs = bias.storage(), os = result.storage();
    Tape::Active()->Record(result, {xs, bs}, [xs, bs, os, n] {
      const auto g = OutGrad(os);
      if (xs->requires_grad) {
        auto gx = GradBuffer(*xs);
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
      }
      if (bs->requires_grad) {
        auto gb = GradBuffer(*bs);
        for (std::size_t i = 0; i < g.size(); ++i) gb[i % n] += g[i];
      }
    });
  }
  return result;
}

Tensor Scale(const Tensor& x, double factor) {
  return UnaryOp(
      x, "Scale", [factor](double v) { return v * factor; },
      [factor](double, double) { return factor; });
}

Tensor AddScalar(const Tensor& x, double value) {
  return UnaryOp(
      x, "AddScalar", [value](double v) { return v + value; },
      [](double, double) { return 1.0; });
}

Tensor Sigmoid(const Tensor& x) {
  return UnaryOp(x, "Sigmoid", StableSigmoid,
                 [](double, double y) { return y * (1.0 - y); });
}

Tensor Swish(const Tensor& x) {
  return UnaryOp(
      x, "Swish", [](double v) { return v * StableSigmoid(v); },
      [](double v, double) {
        const double s = StableSigmoid(v);
        return s + v * s * (1.0 - s);
      });
}

Tensor Exp(const Tensor& x) {
  return UnaryOp(
      x, "Exp", [](double v) { return std::exp(v); },
      [](double, double y) { return y; });
}

Tensor Log(const Tensor& x) {
  RequireDefined(x, "Log");
  for (double v : x.data()) {
    if (!(v > 0.0)) {
      throw DomainError("Log: non-positive input " + std::to_string(v));
    }
  }
  return UnaryOp(
      x, "Log", [](double v) { return std::log(v); },
      [](double v, double) { return 1.0 / v; });
}

Tensor Clamp(const Tensor& x, double lo, double hi) {
  if (!(lo <= hi)) throw std::invalid_argument("Clamp: lo > hi");
  return UnaryOp(
      x, "Clamp", [lo, hi](double v) { return std::clamp(v, lo, hi); },
      [lo, hi](double v, double) { return (v > lo && v < hi) ? 1.0 : 0.0; });
}

Tensor ScaleLastDim(const Tensor& x, const Tensor& s) {
  RequireDefined(x, "ScaleLastDim");
  RequireDefined(s, "ScaleLastDim");
  Shape expected = x.shape();
  if (!expected.empty()) expected.back() = 1;
  if (x.rank() < 1 || s.shape() != expected) {
    throw ShapeError("ScaleLastDim: scale " + ShapeToString(s.shape()) +
                     " does not match " + ShapeToString(x.shape()));
  }
  const std::size_t n = x.shape().back();
  const auto xd = x.data();
  const auto sd = s.data();
  std::vector<double> out(xd.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xd[i] * sd[i / n];
  Tensor result = MakeTensor(x.shape(), std::move(out));
  if (ShouldRecord({&x, &s})) {
    StoragePtr xs = x.storage(), ss = s.storage(), os = result.storage();
    Tape::Active()->Record(result, {xs, ss}, [xs, ss, os, n] {
      const auto g = OutGrad(os);
      if (xs->requires_grad) {
        auto gx = GradBuffer(*xs);
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * ss->data[i / n];
      }
      if (ss->requires_grad) {
        auto gs = GradBuffer(*ss);
        for (std::size_t i = 0; i < g.size(); ++i) {
          gs[i / n] += g[i] * xs->data[i];
        }
      }
    });
  }
  return result;
}

// ---------------------------------------------------------------------------
// Shape and reduction

Tensor Softmax(const Tensor& x) {
  RequireDefined(x, "Softmax");
  if (x.rank() < 1 || x.shape().back() == 0) {
    throw ShapeError("Softmax: empty last dim in " + ShapeToString(x.shape()));
  }
  const std::size_t n = x.shape().back();
  const std::size_t rows = x.size() / n;
  const auto xd = x.data();
  std::vector<double> out(xd.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = xd.data() + r * n;
    double* o = out.data() + r * n;
    const double max = *std::max_element(in, in + n);
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      o[j] = std::exp(in[j] - max);
      total += o[j];
    }
    for (std::size_t j = 0; j < n; ++j) o[j] /= total;
  }
  Tensor result = MakeTensor(x.shape(), std::move(out));
  if (ShouldRecord({&x})) {
    StoragePtr xs = x.storage(), os = result.storage();
    Tape::Active()->Record(result, {xs}, [xs, os, n, rows] {
      const auto g = OutGrad(os);
      auto gx = GradBuffer(*xs);
      for (std::size_t r = 0; r < rows; ++r) {
        const double* y = os->data.data() + r * n;
        const double* gr = g.data() + r * n;
        double dot = 0.0;
        for (std::size_t j = 0; j < n; ++j) dot += gr[j] * y[j];
        for (std::size_t j = 0; j < n; ++j) gx[r * n + j] += y[j] * (gr[j] - dot);
      }
    });
  }
  return result;
}

Tensor Concat(std::span<const Tensor> parts) {
  if (parts.empty()) throw ShapeError("Concat: no parts");
  for (const Tensor& p : parts) RequireDefined(p, "Concat");
  Shape lead = parts[0].shape();
  if (lead.empty()) throw ShapeError("Concat: rank-0 part");
  lead.pop_back();
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const Tensor& p : parts) {
    Shape pl = p.shape();
    pl.pop_back();
    if (pl != lead) {
      throw ShapeError("Concat: part " + ShapeToString(p.shape()) +
                       " disagrees with " + ShapeToString(parts[0].shape()));
    }
    widths.push_back(p.shape().back());
    total += p.shape().back();
  }
  const std::size_t rows = NumElements(lead);
  std::vector<double> out(rows * total);
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const auto pd = parts[k].data();
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy_n(pd.data() + r * widths[k], widths[k],
                  out.data() + r * total + offset);
    }
    offset += widths[k];
  }
  Shape out_shape = lead;
  out_shape.push_back(total);
  Tensor result = MakeTensor(std::move(out_shape), std::move(out));

  bool any = false;
  for (const Tensor& p : parts) any = any || ShouldRecord({&p});
  if (any) {
    std::vector<StoragePtr> inputs;
    for (const Tensor& p : parts) inputs.push_back(p.storage());
    StoragePtr os = result.storage();
    Tape::Active()->Record(result, inputs,
                           [inputs, widths, os, rows, total] {
                             const auto g = OutGrad(os);
                             std::size_t off = 0;
                             for (std::size_t k = 0; k < inputs.size(); ++k) {
                               if (inputs[k]->requires_grad) {
                                 auto gp = GradBuffer(*inputs[k]);
                                 for (std::size_t r = 0; r < rows; ++r) {
                                   for (std::size_t j = 0; j < widths[k]; ++j) {
                                     gp[r * widths[k] + j] +=
                                         g[r * total + off + j];
                                   }
                                 }
                               }
                               off += widths[k];
                             }
                           });
  }
  return result;
}

Tensor Concat(std::initializer_list<Tensor> parts) {
  return Concat(std::span<const Tensor>(parts.begin(), parts.size()));
}

Tensor Slice(const Tensor& x, std::size_t offset, std::size_t length) {
  RequireDefined(x, "Slice");
  if (x.rank() < 1 || length == 0 || offset + length > x.shape().back()) {
    throw ShapeError("Slice: [" + std::to_string(offset) + ", " +
                     std::to_string(offset + length) + ") out of range for " +
                     ShapeToString(x.shape()));
  }
  const std::size_t n = x.shape().back();
  const std::size_t rows = x.size() / n;
  const auto xd = x.data();
  std::vector<double> out(rows * length);
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(xd.data() + r * n + offset, length, out.data() + r * length);
  }
  Shape out_shape = x.shape();
  out_shape.back() = length;
  Tensor result = MakeTensor(std::move(out_shape), std::move(out));
  if (ShouldRecord({&x})) {
    StoragePtr xs = x.storage(), os = result.storage();
    Tape::Active()->Record(result, {xs}, [xs, os, rows, n, offset, length] {
      const auto g = OutGrad(os);
      auto gx = GradBuffer(*xs);
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t j = 0; j < length; ++j) {
          gx[r * n + offset + j] += g[r * length + j];
        }
      }
    });
  }
  return result;
}

Tensor Reshape(const Tensor& x, Shape shape) {
  RequireDefined(x, "Reshape");
  if (NumElements(shape) != x.size()) {
    throw ShapeError("Reshape: " + ShapeToString(x.shape()) + " to " +
                     ShapeToString(shape));
  }
  Tensor result = MakeTensor(std::move(shape),
                             std::vector<double>(x.data().begin(), x.data().end()));
  if (ShouldRecord({&x})) {
    StoragePtr xs = x.storage(), os = result.storage();
    Tape::Active()->Record(result, {xs}, [xs, os] {
      const auto g = OutGrad(os);
      auto gx = GradBuffer(*xs);
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
    });
  }
  return result;
}

Tensor GatherRows(const Tensor& table, std::span<const std::size_t> ids,
                  Shape leading_shape) {
  RequireDefined(table, "GatherRows");
  if (table.rank() != 2) {
    throw ShapeError("GatherRows: table must be 2-D, got " +
                     ShapeToString(table.shape()));
  }
  if (NumElements(leading_shape) != ids.size()) {
    throw ShapeError("GatherRows: " + std::to_string(ids.size()) +
                     " ids for leading shape " + ShapeToString(leading_shape));
  }
  const std::size_t n_rows = table.dim(0);
  const std::size_t d = table.dim(1);
  const auto td = table.data();
  std::vector<double> out(ids.size() * d);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] >= n_rows) {
      throw std::out_of_range("GatherRows: id " + std::to_string(ids[i]) +
                              " >= " + std::to_string(n_rows));
    }
    std::copy_n(td.data() + ids[i] * d, d, out.data() + i * d);
  }
  leading_shape.push_back(d);
  Tensor result = MakeTensor(std::move(leading_shape), std::move(out));
  if (ShouldRecord({&table})) {
    StoragePtr ts = table.storage(), os = result.storage();
    std::vector<std::size_t> saved(ids.begin(), ids.end());
    Tape::Active()->Record(result, {ts}, [ts, os, saved = std::move(saved), d] {
      const auto g = OutGrad(os);
      auto gt = GradBuffer(*ts);
      for (std::size_t i = 0; i < saved.size(); ++i) {
        double* row = gt.data() + saved[i] * d;
        for (std::size_t j = 0; j < d; ++j) row[j] += g[i * d + j];
      }
    });
  }
  return result;
}

Tensor Sum(const Tensor& x) {
  RequireDefined(x, "Sum");
  double total = 0.0;
  for (double v : x.data()) total += v;
  Tensor result = Tensor::Scalar(total);
  if (ShouldRecord({&x})) {
    StoragePtr xs = x.storage(), os = result.storage();
    Tape::Active()->Record(result, {xs}, [xs, os] {
      const double g = os->grad[0];
      auto gx = GradBuffer(*xs);
      for (double& v : gx) v += g;
    });
  }
  return result;
}

Tensor Mean(const Tensor& x) {
  RequireDefined(x, "Mean");
  if (x.size() == 0) throw ShapeError("Mean: empty tensor");
  return Scale(Sum(x), 1.0 / static_cast<double>(x.size()));
}

}  // namespace gatedctr
