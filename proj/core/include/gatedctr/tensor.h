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

// Dense float64 tensors with define-by-run reverse-mode differentiation.
//
// A Tensor is a shared handle onto row-major storage. Operations are free
// functions; when a Tape is active on the current thread and any operand
// requires a gradient, the operation records a backward closure on that
// tape. Tape::Backward() replays the closures in reverse recording order,
// accumulating d(loss)/d(x) into every reachable tensor's grad buffer.
//
//   Tensor w = Tensor::FromData({2}, {1.0, 2.0}).set_requires_grad(true);
//   Tape tape;
//   Tensor loss = Sum(Mul(w, w));
//   tape.Backward(loss);  // w.grad() == {2.0, 4.0}
//
// Without an active tape, operations compute values only.

#ifndef GATEDCTR_TENSOR_H_
#define GATEDCTR_TENSOR_H_

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace gatedctr {

using Shape = std::vector<std::size_t>;

std::size_t NumElements(const Shape& shape);
std::string ShapeToString(const Shape& shape);

// Raised when operand shapes are incompatible.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Raised when an input lies outside an operation's mathematical domain.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class Tape;

namespace internal {

struct TensorStorage {
  Shape shape;
  std::vector<double> data;
  // Empty until a gradient is first accumulated.
  std::vector<double> grad;
  bool requires_grad = false;
  // Tape and node index that produced this tensor, if recorded.
  const Tape* tape = nullptr;
  std::size_t node = 0;
};

}  // namespace internal

class Tensor {
 public:
  // An undefined handle; most operations reject it.
  Tensor() = default;

  static Tensor Zeros(Shape shape);
  static Tensor Full(Shape shape, double value);
  static Tensor FromData(Shape shape, std::vector<double> data);
  static Tensor Scalar(double value);

  bool defined() const { return storage_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t size() const;

  std::span<const double> data() const;
  std::span<double> mutable_data();
  // Single value of a one-element tensor.
  double item() const;

  bool requires_grad() const;
  Tensor& set_requires_grad(bool value);
  bool has_grad() const;
  // Zeros when no gradient has been accumulated.
  std::vector<double> grad() const;
  std::span<double> mutable_grad();
  void ZeroGrad();

  // Deep copy of the values, detached from any tape. requires_grad is kept.
  Tensor Clone() const;
  // Same values, no gradient tracking.
  Tensor Detach() const;

  bool SameStorage(const Tensor& other) const {
    return storage_ == other.storage_;
  }

  // Engine internals; used by op implementations.
  const std::shared_ptr<internal::TensorStorage>& storage() const {
    return storage_;
  }

 private:
  explicit Tensor(std::shared_ptr<internal::TensorStorage> storage)
      : storage_(std::move(storage)) {}
  friend Tensor MakeTensor(Shape shape, std::vector<double> data);

  std::shared_ptr<internal::TensorStorage> storage_;
};

Tensor MakeTensor(Shape shape, std::vector<double> data);

// Records operations issued on this thread while alive. Tapes nest; the
// innermost live tape is the active one.
class Tape {
 public:
  using BackwardFn = std::function<void()>;

  Tape();
  ~Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  static Tape* Active();

  // Seeds d(loss)/d(loss) = 1 and propagates to every reachable tensor.
  // The loss must hold one element and must have been produced on this tape.
  void Backward(const Tensor& loss);

  std::size_t size() const { return nodes_.size(); }

  // Appends a node whose closure reads output's grad and accumulates into
  // the grads of its inputs.
  void Record(const Tensor& output,
              std::vector<std::shared_ptr<internal::TensorStorage>> inputs,
              BackwardFn backward);

 private:
  struct Node {
    std::vector<std::shared_ptr<internal::TensorStorage>> inputs;
    std::shared_ptr<internal::TensorStorage> output;
    BackwardFn backward;
  };

  std::vector<Node> nodes_;
  Tape* previous_ = nullptr;
};

// Disables recording for its lifetime, e.g. during evaluation.
class NoGradScope {
 public:
  NoGradScope();
  ~NoGradScope();
  NoGradScope(const NoGradScope&) = delete;
  NoGradScope& operator=(const NoGradScope&) = delete;

 private:
  bool previous_;
};

// ---------------------------------------------------------------------------
// Linear algebra.

// a: [..., k], b: [k, n] -> [..., n]. Leading dims of a are flattened into
// rows.
Tensor MatMul(const Tensor& a, const Tensor& b);

// a: [B, m, k], b: [B, k, n] -> [B, m, n]. With transpose_b, b is [B, n, k].
Tensor BatchMatMul(const Tensor& a, const Tensor& b, bool transpose_b = false);

// ---------------------------------------------------------------------------
// Elementwise.

Tensor Add(const Tensor& a, const Tensor& b);
Tensor Sub(const Tensor& a, const Tensor& b);
Tensor Mul(const Tensor& a, const Tensor& b);
// x: [..., n], bias: [n].
Tensor AddBias(const Tensor& x, const Tensor& bias);
Tensor Scale(const Tensor& x, double factor);
Tensor AddScalar(const Tensor& x, double value);
Tensor Sigmoid(const Tensor& x);
// z * sigmoid(z).
Tensor Swish(const Tensor& x);
Tensor Exp(const Tensor& x);
// Throws DomainError on non-positive entries.
Tensor Log(const Tensor& x);
// Gradient passes only where lo < x < hi.
Tensor Clamp(const Tensor& x, double lo, double hi);
// x: [..., n], s: [..., 1]; every last-dim slice of x is scaled by the
// matching entry of s.
Tensor ScaleLastDim(const Tensor& x, const Tensor& s);

// ---------------------------------------------------------------------------
// Shape and reduction.

// Max-subtracted softmax over the last dimension.
Tensor Softmax(const Tensor& x);
// All parts agree on every dim but the last.
Tensor Concat(std::span<const Tensor> parts);
Tensor Concat(std::initializer_list<Tensor> parts);
// Columns [offset, offset + length) of the last dim.
Tensor Slice(const Tensor& x, std::size_t offset, std::size_t length);
Tensor Reshape(const Tensor& x, Shape shape);
// table: [N, d]; result: leading_shape + [d], rows table[ids[i]].
Tensor GatherRows(const Tensor& table, std::span<const std::size_t> ids,
                  Shape leading_shape);
Tensor Sum(const Tensor& x);
Tensor Mean(const Tensor& x);

}  // namespace gatedctr

#endif  // GATEDCTR_TENSOR_H_
