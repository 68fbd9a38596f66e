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

#include "autodiff/tensor.hpp"

#include <cmath>
#include <sstream>

#include "error.hpp"

namespace avalign {

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor::Tensor(Shape shape, std::vector<double> values)
    : shape_(std::move(shape)), values_(std::move(values)) {
  if (shape_.empty()) fail(ErrorCode::kInvalidArgument, "tensor shape must have at least one dimension");
  for (std::size_t d : shape_) {
    if (d == 0) fail(ErrorCode::kInvalidArgument, "tensor dimensions must be positive, got " + shape_string(shape_));
  }
  if (shape_size(shape_) != values_.size()) {
    fail(ErrorCode::kDimensionMismatch, "tensor shape " + shape_string(shape_) + " does not match " +
                                            std::to_string(values_.size()) + " values");
  }
  for (double v : values_) {
    if (!std::isfinite(v)) fail(ErrorCode::kNonFinite, "tensor values must be finite");
  }
}

Tensor Tensor::zeros(Shape shape) { return full(std::move(shape), 0.0); }

Tensor Tensor::full(Shape shape, double value) {
  std::size_t n = shape_size(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value));
}

Tensor Tensor::scalar(double value) { return Tensor({1}, {value}); }

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> values) {
  return Tensor({rows, cols}, std::move(values));
}

Tensor Tensor::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  std::size_t r = rows.size();
  std::size_t c = r ? rows.begin()->size() : 0;
  std::vector<double> v;
  v.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) fail(ErrorCode::kDimensionMismatch, "ragged rows in matrix literal");
    v.insert(v.end(), row.begin(), row.end());
  }
  return Tensor({r, c}, std::move(v));
}

Tensor Tensor::identity(std::size_t n) {
  std::vector<double> v(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) v[i * n + i] = 1.0;
  return Tensor({n, n}, std::move(v));
}

double Tensor::item() const {
  if (values_.size() != 1) fail(ErrorCode::kDimensionMismatch, "item() on non-scalar tensor " + shape_string(shape_));
  return values_[0];
}

Tensor Tensor::reshaped(Shape shape) const {
  if (shape_size(shape) != values_.size()) {
    fail(ErrorCode::kDimensionMismatch, "cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
  }
  return Tensor(std::move(shape), values_);
}

Tensor Tensor::transposed() const {
  require_matrix(*this, "transpose");
  std::size_t r = rows(), c = cols();
  std::vector<double> out(values_.size());
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = values_[i * c + j];
  return Tensor({c, r}, std::move(out));
}

void require_matrix(const Tensor& t, const char* what) {
  if (!t.is_matrix()) {
    fail(ErrorCode::kDimensionMismatch, std::string(what) + " expects a matrix, got " + shape_string(t.shape()));
  }
}

}  // namespace avalign
