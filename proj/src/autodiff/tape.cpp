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

#include "autodiff/tape.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "error.hpp"

namespace avalign {

const Tensor& Var::value() const {
  if (!tape_) fail(ErrorCode::kInvalidArgument, "use of an unbound Var");
  return tape_->value(id_);
}

Var Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::leaf(Tensor value) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = true;
  n.is_leaf = true;
  return push(std::move(n));
}

Var Tape::constant(Tensor value) {
  Node n;
  n.value = std::move(value);
  return push(std::move(n));
}

Var Tape::record(Tensor value, std::vector<std::size_t> inputs, BackwardFn backward) {
  Node n;
  n.value = std::move(value);
  for (std::size_t in : inputs) {
    if (in >= nodes_.size()) fail(ErrorCode::kInternal, "tape input recorded after its consumer");
    n.requires_grad = n.requires_grad || nodes_[in].requires_grad;
  }
  n.inputs = std::move(inputs);
  n.backward = std::move(backward);
  return push(std::move(n));
}

void Tape::backward(Var output) {
  if (output.tape() != this) fail(ErrorCode::kInvalidArgument, "output belongs to a different tape");
  const Tensor& out = nodes_[output.id()].value;
  if (out.size() != 1) {
    fail(ErrorCode::kDimensionMismatch, "backward() needs a scalar output, got " + shape_string(out.shape()));
  }
  grads_.assign(nodes_.size(), {});
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (nodes_[i].is_leaf) grads_[i].assign(nodes_[i].value.size(), 0.0);
  }
  grads_[output.id()].assign(1, 1.0);

  std::vector<double*> gin;
  for (std::size_t i = output.id() + 1; i-- > 0;) {
    Node& node = nodes_[i];
    if (!node.backward || grads_[i].empty() || !node.requires_grad) continue;
    gin.assign(node.inputs.size(), nullptr);
    for (std::size_t k = 0; k < node.inputs.size(); ++k) {
      std::size_t in = node.inputs[k];
      if (!nodes_[in].requires_grad) continue;
      if (grads_[in].empty()) grads_[in].assign(nodes_[in].value.size(), 0.0);
      gin[k] = grads_[in].data();
    }
    node.backward(*this, grads_[i], gin);
  }
}

Tensor Tape::grad(Var v) const {
  if (v.tape() != this) fail(ErrorCode::kInvalidArgument, "Var belongs to a different tape");
  const Tensor& value = nodes_[v.id()].value;
  if (v.id() >= grads_.size() || grads_[v.id()].empty()) return Tensor::zeros(value.shape());
  return Tensor(value.shape(), grads_[v.id()]);
}

namespace {

Tape& same_tape(Var a, Var b) {
  if (!a.valid() || a.tape() != b.tape()) fail(ErrorCode::kInvalidArgument, "operands live on different tapes");
  return *a.tape();
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    fail(ErrorCode::kDimensionMismatch,
         std::string(op) + ": shape " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  }
}

void matmul_into(std::span<const double> a, std::span<const double> b, std::span<double> c, std::size_t m,
                 std::size_t k, std::size_t n) {
  std::fill(c.begin(), c.end(), 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      double aip = a[i * k + p];
      if (aip == 0.0) continue;
      const double* brow = b.data() + p * n;
      double* crow = c.data() + i * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
    }
  }
}

struct SoftmaxLayout {
  std::size_t outer;   // number of independent slices
  std::size_t length;  // slice length
  std::size_t stride;  // distance between consecutive slice elements
  std::size_t step;    // distance between consecutive slice starts
};

SoftmaxLayout softmax_layout(const Tensor& t, std::size_t axis) {
  if (t.rank() == 1) {
    if (axis != 0) fail(ErrorCode::kInvalidArgument, "softmax axis out of range");
    return {1, t.size(), 1, 0};
  }
  if (t.rank() != 2 || axis > 1) fail(ErrorCode::kInvalidArgument, "softmax supports rank 1/2 and axis 0/1");
  std::size_t r = t.rows(), c = t.cols();
  if (axis == 1) return {r, c, 1, c};
  return {c, r, c, 1};
}

std::vector<double> softmax_values(const Tensor& t, std::size_t axis) {
  SoftmaxLayout l = softmax_layout(t, axis);
  std::vector<double> out(t.size());
  auto x = t.values();
  for (std::size_t o = 0; o < l.outer; ++o) {
    std::size_t base = o * l.step;
    double mx = x[base];
    for (std::size_t i = 1; i < l.length; ++i) mx = std::max(mx, x[base + i * l.stride]);
    double total = 0.0;
    for (std::size_t i = 0; i < l.length; ++i) {
      double e = std::exp(x[base + i * l.stride] - mx);
      out[base + i * l.stride] = e;
      total += e;
    }
    for (std::size_t i = 0; i < l.length; ++i) out[base + i * l.stride] /= total;
  }
  return out;
}

std::vector<double> row_norms(const Tensor& x, const char* which) {
  std::size_t r = x.rows(), d = x.cols();
  std::vector<double> norms(r);
  for (std::size_t i = 0; i < r; ++i) {
    double s = 0.0;
    for (std::size_t k = 0; k < d; ++k) s += x.at(i, k) * x.at(i, k);
    norms[i] = std::sqrt(s);
    if (!(norms[i] > 0.0)) {
      fail(ErrorCode::kZeroNorm, std::string("cosine similarity: row ") + std::to_string(i) + " of " + which +
                                     " has zero norm");
    }
  }
  return norms;
}

std::vector<double> cosine_values(const Tensor& x, const Tensor& y, const std::vector<double>& nx,
                                  const std::vector<double>& ny) {
  std::size_t m = x.rows(), n = y.rows(), d = x.cols();
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double dot = 0.0;
      for (std::size_t k = 0; k < d; ++k) dot += x.at(i, k) * y.at(j, k);
      out[i * n + j] = std::clamp(dot / (nx[i] * ny[j]), -1.0, 1.0);
    }
  }
  return out;
}

void check_cosine_operands(const Tensor& x, const Tensor& y) {
  require_matrix(x, "cosine_similarity_matrix");
  require_matrix(y, "cosine_similarity_matrix");
  if (x.cols() != y.cols()) {
    fail(ErrorCode::kDimensionMismatch, "cosine_similarity_matrix: embedding widths differ (" +
                                            std::to_string(x.cols()) + " vs " + std::to_string(y.cols()) + ")");
  }
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul");
  require_matrix(b, "matmul");
  if (a.cols() != b.rows()) {
    fail(ErrorCode::kDimensionMismatch,
         "matmul: inner dimensions disagree " + shape_string(a.shape()) + " x " + shape_string(b.shape()));
  }
  std::vector<double> c(a.rows() * b.cols());
  matmul_into(a.values(), b.values(), c, a.rows(), a.cols(), b.cols());
  return Tensor({a.rows(), b.cols()}, std::move(c));
}

Tensor softmax(const Tensor& a, std::size_t axis) { return Tensor(a.shape(), softmax_values(a, axis)); }

Tensor cosine_similarity_matrix(const Tensor& x, const Tensor& y) {
  check_cosine_operands(x, y);
  auto nx = row_norms(x, "x");
  auto ny = row_norms(y, "y");
  return Tensor({x.rows(), y.rows()}, cosine_values(x, y, nx, ny));
}

Var matmul(Var a, Var b) {
  Tape& t = same_tape(a, b);
  Tensor c = matmul(a.value(), b.value());
  std::size_t m = a.value().rows(), k = a.value().cols(), n = b.value().cols();
  std::size_t ia = a.id(), ib = b.id();
  return t.record(std::move(c), {ia, ib}, [=](const Tape& tp, std::span<const double> g, std::span<double* const> gin) {
    auto av = tp.value(ia).values();
    auto bv = tp.value(ib).values();
    if (gin[0]) {
      // dA = G B^T
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
          double gij = g[i * n + j];
          if (gij == 0.0) continue;
          for (std::size_t p = 0; p < k; ++p) gin[0][i * k + p] += gij * bv[p * n + j];
        }
    }
    if (gin[1]) {
      // dB = A^T G
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          double aip = av[i * k + p];
          if (aip == 0.0) continue;
          for (std::size_t j = 0; j < n; ++j) gin[1][p * n + j] += aip * g[i * n + j];
        }
    }
  });
}

Var transpose(Var a) {
  Tape& t = *a.tape();
  Tensor out = a.value().transposed();
  std::size_t r = a.value().rows(), c = a.value().cols();
  return t.record(std::move(out), {a.id()}, [=](const Tape&, std::span<const double> g, std::span<double* const> gin) {
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) gin[0][i * c + j] += g[j * r + i];
  });
}

Var reshape(Var a, Shape shape) {
  Tape& t = *a.tape();
  Tensor out = a.value().reshaped(std::move(shape));
  return t.record(std::move(out), {a.id()}, [](const Tape&, std::span<const double> g, std::span<double* const> gin) {
    for (std::size_t i = 0; i < g.size(); ++i) gin[0][i] += g[i];
  });
}

Var add(Var a, Var b) {
  Tape& t = same_tape(a, b);
  require_same_shape(a.value(), b.value(), "add");
  auto av = a.value().values(), bv = b.value().values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
  return t.record(Tensor(a.shape(), std::move(out)), {a.id(), b.id()},
                  [](const Tape&, std::span<const double> g, std::span<double* const> gin) {
                    for (std::size_t k = 0; k < 2; ++k)
                      if (gin[k])
                        for (std::size_t i = 0; i < g.size(); ++i) gin[k][i] += g[i];
                  });
}

Var sub(Var a, Var b) {
  Tape& t = same_tape(a, b);
  require_same_shape(a.value(), b.value(), "sub");
  auto av = a.value().values(), bv = b.value().values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] - bv[i];
  return t.record(Tensor(a.shape(), std::move(out)), {a.id(), b.id()},
                  [](const Tape&, std::span<const double> g, std::span<double* const> gin) {
                    if (gin[0])
                      for (std::size_t i = 0; i < g.size(); ++i) gin[0][i] += g[i];
                    if (gin[1])
                      for (std::size_t i = 0; i < g.size(); ++i) gin[1][i] -= g[i];
                  });
}

Var mul(Var a, Var b) {
  Tape& t = same_tape(a, b);
  require_same_shape(a.value(), b.value(), "mul");
  auto av = a.value().values(), bv = b.value().values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  std::size_t ia = a.id(), ib = b.id();
  return t.record(Tensor(a.shape(), std::move(out)), {ia, ib},
                  [=](const Tape& tp, std::span<const double> g, std::span<double* const> gin) {
                    auto x = tp.value(ia).values(), y = tp.value(ib).values();
                    if (gin[0])
                      for (std::size_t i = 0; i < g.size(); ++i) gin[0][i] += g[i] * y[i];
                    if (gin[1])
                      for (std::size_t i = 0; i < g.size(); ++i) gin[1][i] += g[i] * x[i];
                  });
}

Var scale(Var a, double factor) {
  Tape& t = *a.tape();
  auto av = a.value().values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * factor;
  return t.record(Tensor(a.shape(), std::move(out)), {a.id()},
                  [factor](const Tape&, std::span<const double> g, std::span<double* const> gin) {
                    for (std::size_t i = 0; i < g.size(); ++i) gin[0][i] += g[i] * factor;
                  });
}

Var add_scalar(Var a, double offset) {
  Tape& t = *a.tape();
  auto av = a.value().values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + offset;
  return t.record(Tensor(a.shape(), std::move(out)), {a.id()},
                  [](const Tape&, std::span<const double> g, std::span<double* const> gin) {
                    for (std::size_t i = 0; i < g.size(); ++i) gin[0][i] += g[i];
                  });
}

Var exp(Var a) {
  Tape& t = *a.tape();
  auto av = a.value().values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::exp(av[i]);
  Tensor value(a.shape(), std::move(out));
  std::vector<double> local(value.data());
  return t.record(std::move(value), {a.id()},
                  [local = std::move(local)](const Tape&, std::span<const double> g, std::span<double* const> gin) {
                    for (std::size_t i = 0; i < g.size(); ++i) gin[0][i] += g[i] * local[i];
                  });
}

Var tanh(Var a) {
  Tape& t = *a.tape();
  auto av = a.value().values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(av[i]);
  Tensor value(a.shape(), out);
  return t.record(std::move(value), {a.id()},
                  [y = std::move(out)](const Tape&, std::span<const double> g, std::span<double* const> gin) {
                    for (std::size_t i = 0; i < g.size(); ++i) gin[0][i] += g[i] * (1.0 - y[i] * y[i]);
                  });
}

Var sum(Var a) {
  Tape& t = *a.tape();
  double s = 0.0;
  for (double v : a.value().values()) s += v;
  std::size_t n = a.value().size();
  return t.record(Tensor::scalar(s), {a.id()},
                  [n](const Tape&, std::span<const double> g, std::span<double* const> gin) {
                    for (std::size_t i = 0; i < n; ++i) gin[0][i] += g[0];
                  });
}

Var mean(Var a) { return scale(sum(a), 1.0 / static_cast<double>(a.value().size())); }

Var mean_rows(Var a) {
  Tape& t = *a.tape();
  require_matrix(a.value(), "mean_rows");
  std::size_t r = a.value().rows(), c = a.value().cols();
  std::vector<double> out(c, 0.0);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j] += a.value().at(i, j);
  for (double& v : out) v /= static_cast<double>(r);
  return t.record(Tensor({1, c}, std::move(out)), {a.id()},
                  [r, c](const Tape&, std::span<const double> g, std::span<double* const> gin) {
                    double inv = 1.0 / static_cast<double>(r);
                    for (std::size_t i = 0; i < r; ++i)
                      for (std::size_t j = 0; j < c; ++j) gin[0][i * c + j] += g[j] * inv;
                  });
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) fail(ErrorCode::kInvalidArgument, "concat_rows needs at least one operand");
  Tape& t = *parts[0].tape();
  std::size_t c = parts[0].value().cols();
  std::size_t total = 0;
  std::vector<std::size_t> ids;
  std::vector<std::size_t> offsets;
  for (const Var& p : parts) {
    if (p.tape() != &t) fail(ErrorCode::kInvalidArgument, "operands live on different tapes");
    require_matrix(p.value(), "concat_rows");
    if (p.value().cols() != c) fail(ErrorCode::kDimensionMismatch, "concat_rows: column counts differ");
    ids.push_back(p.id());
    offsets.push_back(total);
    total += p.value().rows();
  }
  std::vector<double> out;
  out.reserve(total * c);
  for (const Var& p : parts) out.insert(out.end(), p.value().values().begin(), p.value().values().end());
  return t.record(Tensor({total, c}, std::move(out)), std::move(ids),
                  [offsets, c](const Tape& tp, std::span<const double> g, std::span<double* const> gin) {
                    (void)tp;
                    for (std::size_t k = 0; k < gin.size(); ++k) {
                      if (!gin[k]) continue;
                      std::size_t end = (k + 1 < offsets.size() ? offsets[k + 1] : g.size() / c);
                      std::size_t n = (end - offsets[k]) * c;
                      for (std::size_t i = 0; i < n; ++i) gin[k][i] += g[offsets[k] * c + i];
                    }
                  });
}

Var softmax(Var a, std::size_t axis) {
  Tape& t = *a.tape();
  SoftmaxLayout l = softmax_layout(a.value(), axis);
  std::vector<double> y = softmax_values(a.value(), axis);
  Tensor value(a.shape(), y);
  return t.record(std::move(value), {a.id()},
                  [l, y = std::move(y)](const Tape&, std::span<const double> g, std::span<double* const> gin) {
                    for (std::size_t o = 0; o < l.outer; ++o) {
                      std::size_t base = o * l.step;
                      double dot = 0.0;
                      for (std::size_t i = 0; i < l.length; ++i) {
                        std::size_t idx = base + i * l.stride;
                        dot += g[idx] * y[idx];
                      }
                      for (std::size_t i = 0; i < l.length; ++i) {
                        std::size_t idx = base + i * l.stride;
                        gin[0][idx] += y[idx] * (g[idx] - dot);
                      }
                    }
                  });
}

Var cross_entropy(Var logits, std::span<const std::size_t> targets) {
  Tape& t = *logits.tape();
  const Tensor& x = logits.value();
  require_matrix(x, "cross_entropy");
  std::size_t r = x.rows(), v = x.cols();
  if (targets.size() != r) fail(ErrorCode::kDimensionMismatch, "cross_entropy: one target per row required");
  std::vector<double> probs = softmax_values(x, 1);
  double loss = 0.0;
  for (std::size_t i = 0; i < r; ++i) {
    if (targets[i] >= v) fail(ErrorCode::kInvalidArgument, "cross_entropy: target outside vocabulary");
    double mx = x.at(i, 0);
    for (std::size_t j = 1; j < v; ++j) mx = std::max(mx, x.at(i, j));
    double z = 0.0;
    for (std::size_t j = 0; j < v; ++j) z += std::exp(x.at(i, j) - mx);
    loss += (mx + std::log(z)) - x.at(i, targets[i]);
  }
  loss /= static_cast<double>(r);
  std::vector<std::size_t> tg(targets.begin(), targets.end());
  return t.record(Tensor::scalar(loss), {logits.id()},
                  [r, v, probs = std::move(probs), tg = std::move(tg)](const Tape&, std::span<const double> g,
                                                                       std::span<double* const> gin) {
                    double s = g[0] / static_cast<double>(r);
                    for (std::size_t i = 0; i < r; ++i) {
                      for (std::size_t j = 0; j < v; ++j) gin[0][i * v + j] += s * probs[i * v + j];
                      gin[0][i * v + tg[i]] -= s;
                    }
                  });
}

Var cosine_similarity_matrix(Var x, Var y) {
  Tape& t = same_tape(x, y);
  const Tensor& xv = x.value();
  const Tensor& yv = y.value();
  check_cosine_operands(xv, yv);
  auto nx = row_norms(xv, "x");
  auto ny = row_norms(yv, "y");
  std::vector<double> s = cosine_values(xv, yv, nx, ny);
  Tensor value({xv.rows(), yv.rows()}, s);
  std::size_t ix = x.id(), iy = y.id();
  return t.record(std::move(value), {ix, iy},
                  [=, s = std::move(s)](const Tape& tp, std::span<const double> g, std::span<double* const> gin) {
                    const Tensor& X = tp.value(ix);
                    const Tensor& Y = tp.value(iy);
                    std::size_t m = X.rows(), n = Y.rows(), d = X.cols();
                    // d s_ij / d x_i = (y_j/|y_j| - s_ij x_i/|x_i|) / |x_i|
                    for (std::size_t i = 0; i < m; ++i) {
                      for (std::size_t j = 0; j < n; ++j) {
                        double gij = g[i * n + j];
                        if (gij == 0.0) continue;
                        double sij = s[i * n + j];
                        if (gin[0]) {
                          double c = gij / nx[i];
                          for (std::size_t k = 0; k < d; ++k)
                            gin[0][i * d + k] += c * (Y.at(j, k) / ny[j] - sij * X.at(i, k) / nx[i]);
                        }
                        if (gin[1]) {
                          double c = gij / ny[j];
                          for (std::size_t k = 0; k < d; ++k)
                            gin[1][j * d + k] += c * (X.at(i, k) / nx[i] - sij * Y.at(j, k) / ny[j]);
                        }
                      }
                    }
                  });
}

Var minmax_normalize(Var a) {
  Tape& t = *a.tape();
  auto x = a.value().values();
  std::size_t lo = 0, hi = 0;
  for (std::size_t i = 1; i < x.size(); ++i) {
    if (x[i] < x[lo]) lo = i;
    if (x[i] > x[hi]) hi = i;
  }
  double range = x[hi] - x[lo];
  bool constant = !(range > 0.0);
  std::vector<double> y(x.size(), 0.0);
  if (!constant)
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = (x[i] - x[lo]) / range;
  Tensor value(a.shape(), y);
  return t.record(std::move(value), {a.id()},
                  [=, y = std::move(y)](const Tape&, std::span<const double> g, std::span<double* const> gin) {
                    if (constant) return;
                    // y_i = (x_i - a) / (b - a): dy_i/da = (y_i - 1)/r, dy_i/db = -y_i/r.
                    double ga = 0.0, gb = 0.0;
                    for (std::size_t i = 0; i < g.size(); ++i) {
                      gin[0][i] += g[i] / range;
                      ga += g[i] * (y[i] - 1.0) / range;
                      gb -= g[i] * y[i] / range;
                    }
                    gin[0][lo] += ga;
                    gin[0][hi] += gb;
                  });
}

Var frobenius_dot(Var a, const Tensor& weights) {
  Tape& t = *a.tape();
  require_same_shape(a.value(), weights, "frobenius_dot");
  auto x = a.value().values();
  auto w = weights.values();
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * w[i];
  std::vector<double> wv(w.begin(), w.end());
  return t.record(Tensor::scalar(s), {a.id()},
                  [wv = std::move(wv)](const Tape&, std::span<const double> g, std::span<double* const> gin) {
                    for (std::size_t i = 0; i < wv.size(); ++i) gin[0][i] += g[0] * wv[i];
                  });
}

}  // namespace avalign
