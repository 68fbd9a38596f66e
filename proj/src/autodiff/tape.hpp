// Copyright 2026 The avalign Authors
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

#pragma once

// Reverse-mode differentiation over a flat, eagerly recorded tape.
//
// Every primitive appends one node holding its forward value, the ids of its
// inputs and a closure that scatters the output cotangent into the input
// cotangents. Nodes are appended in evaluation order, so a single reverse
// sweep visits each node exactly once and in valid topological order.

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "autodiff/tensor.hpp"

namespace avalign {

class Tape;

/// Handle to a value recorded on a Tape. Cheap to copy; only valid while the
/// owning tape is alive.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t id() const noexcept { return id_; }
  Tape* tape() const noexcept { return tape_; }
  bool valid() const noexcept { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

class Tape {
 public:
  // gout is the cotangent of the node's output; gin[k] is the cotangent
  // buffer of input k, or nullptr when that input needs no gradient.
  using BackwardFn =
      std::function<void(const Tape& tape, std::span<const double> gout, std::span<double* const> gin)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Differentiable input. backward() reports a gradient for every leaf,
  /// zero if the output does not depend on it.
  Var leaf(Tensor value);
  /// Non-differentiable input.
  Var constant(Tensor value);

  Var record(Tensor value, std::vector<std::size_t> inputs, BackwardFn backward);

  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  const Tensor& value(Var v) const { return nodes_[v.id()].value; }
  std::size_t size() const noexcept { return nodes_.size(); }

  /// Reverse sweep from a scalar output. Throws on non-scalar outputs.
  void backward(Var output);

  /// Gradient of the last backward() output with respect to v.
  Tensor grad(Var v) const;

 private:
  struct Node {
    Tensor value;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
    bool requires_grad = false;
    bool is_leaf = false;
  };

  Var push(Node node);

  std::vector<Node> nodes_;
  std::vector<std::vector<double>> grads_;
};

// ---------------------------------------------------------------------------
// Primitives. All shapes are validated; mismatches throw kDimensionMismatch.

Var matmul(Var a, Var b);
Var transpose(Var a);
Var reshape(Var a, Shape shape);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double factor);
Var add_scalar(Var a, double offset);
Var exp(Var a);
Var tanh(Var a);
Var sum(Var a);
Var mean(Var a);
/// Mean over rows of a matrix: [R x C] -> [1 x C].
Var mean_rows(Var a);
/// Stacks matrices with equal column counts vertically.
Var concat_rows(std::span<const Var> parts);
/// Softmax along an axis of a rank-1 or rank-2 tensor, max-subtracted.
Var softmax(Var a, std::size_t axis);
/// Mean over rows of -log softmax(logits[r])[targets[r]].
Var cross_entropy(Var logits, std::span<const std::size_t> targets);
/// Pairwise cosine similarity of the rows of x [M x D] and y [N x D].
Var cosine_similarity_matrix(Var x, Var y);
/// (a - min a) / (max a - min a); a constant input maps to all zeros.
Var minmax_normalize(Var a);
/// Scalar sum of a ⊙ weights where weights is held constant.
Var frobenius_dot(Var a, const Tensor& weights);

// Plain-value counterparts used outside of a tape.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor softmax(const Tensor& a, std::size_t axis);
Tensor cosine_similarity_matrix(const Tensor& x, const Tensor& y);

}  // namespace avalign
