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

#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "autodiff/gradcheck.hpp"
#include "autodiff/tape.hpp"
#include "test_util.hpp"

namespace avalign {
namespace {

using testing::error_code_of;
using testing::random_tensor;

TEST(Tensor, RejectsNonFiniteAndBadShapes) {
  double nan = std::numeric_limits<double>::quiet_NaN();
  double inf = std::numeric_limits<double>::infinity();
  EXPECT_EQ(error_code_of([&] { Tensor({2}, {1.0, nan}); }), ErrorCode::kNonFinite);
  EXPECT_EQ(error_code_of([&] { Tensor({1}, {inf}); }), ErrorCode::kNonFinite);
  EXPECT_NE(error_code_of([] { Tensor({2, 2}, {1.0, 2.0, 3.0}); }), ErrorCode::kOk);
  EXPECT_NE(error_code_of([] { Tensor({0, 2}, {}); }), ErrorCode::kOk);
}

TEST(Matmul, IdentityTimesIdentity) {
  EXPECT_EQ(matmul(Tensor::identity(2), Tensor::identity(2)), Tensor::identity(2));
}

TEST(Matmul, HandArithmetic) {
  Tensor r = matmul(Tensor::from_rows({{1, 2}, {3, 4}}), Tensor::from_rows({{1}, {1}}));
  EXPECT_EQ(r, Tensor::from_rows({{3}, {7}}));
}

TEST(Matmul, MatchesTripleLoop) {
  std::mt19937_64 rng(11);
  Tensor a = random_tensor(rng, {3, 4});
  Tensor b = random_tensor(rng, {4, 2});
  Tensor r = matmul(a, b);
  ASSERT_EQ(r.shape(), (Shape{3, 2}));
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 2; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < 4; ++k) acc += a.at(i, k) * b.at(k, j);
      EXPECT_NEAR(r.at(i, j), acc, 1e-15);
    }
  }
}

TEST(Matmul, InnerDimensionMismatch) {
  EXPECT_EQ(error_code_of([] { matmul(Tensor::zeros({2, 3}), Tensor::zeros({2, 3})); }),
            ErrorCode::kDimensionMismatch);
}

TEST(Softmax, Examples) {
  Tensor a = softmax(Tensor({2}, {0.0, 0.0}), 0);
  EXPECT_DOUBLE_EQ(a[0], 0.5);
  EXPECT_DOUBLE_EQ(a[1], 0.5);

  Tensor b = softmax(Tensor({2}, {1000.0, 0.0}), 0);
  EXPECT_NEAR(b[0], 1.0, 1e-15);
  EXPECT_GE(b[1], 0.0);
  EXPECT_LT(b[1], 1e-300);

  Tensor c = softmax(Tensor({3}, {1.0, 2.0, 3.0}), 0);
  double z = std::exp(1.0) + std::exp(2.0) + std::exp(3.0);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(c[i], std::exp(i + 1.0) / z, 1e-15);
  EXPECT_NEAR(c[0], 0.09003, 1e-5);
  EXPECT_NEAR(c[1], 0.24473, 1e-5);
  EXPECT_NEAR(c[2], 0.66524, 1e-5);
}

TEST(Softmax, SumsToOneAtLargeMagnitudes) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    Tensor x = random_tensor(rng, {5, 7}, -1e3, 1e3);
    for (std::size_t axis : {0u, 1u}) {
      Tensor s = softmax(x, axis);
      std::size_t outer = axis == 1 ? 5 : 7, inner = axis == 1 ? 7 : 5;
      for (std::size_t o = 0; o < outer; ++o) {
        double total = 0.0;
        for (std::size_t i = 0; i < inner; ++i) {
          double v = axis == 1 ? s.at(o, i) : s.at(i, o);
          EXPECT_GE(v, 0.0);
          total += v;
        }
        EXPECT_NEAR(total, 1.0, 1e-12);
      }
    }
  }
}

TEST(Cosine, IdenticalAndOrthogonal) {
  Tensor x = Tensor::from_rows({{1, 2, 3}});
  EXPECT_NEAR(cosine_similarity_matrix(x, x).item(), 1.0, 1e-15);
  Tensor e0 = Tensor::from_rows({{1, 0}});
  Tensor e1 = Tensor::from_rows({{0, 5}});
  EXPECT_EQ(cosine_similarity_matrix(e0, e1).item(), 0.0);
}

TEST(Cosine, MatchesPerPairOracle) {
  std::mt19937_64 rng(5);
  Tensor x = random_tensor(rng, {2, 3});
  Tensor y = random_tensor(rng, {4, 3});
  Tensor c = cosine_similarity_matrix(x, y);
  for (std::size_t i = 0; i < 2; ++i) {
    for (std::size_t j = 0; j < 4; ++j) {
      double dot = 0.0, nx = 0.0, ny = 0.0;
      for (std::size_t k = 0; k < 3; ++k) {
        dot += x.at(i, k) * y.at(j, k);
        nx += x.at(i, k) * x.at(i, k);
        ny += y.at(j, k) * y.at(j, k);
      }
      EXPECT_NEAR(c.at(i, j), dot / (std::sqrt(nx) * std::sqrt(ny)), 1e-14);
      EXPECT_LE(std::abs(c.at(i, j)), 1.0);
    }
  }
}

TEST(Cosine, SymmetricUpToTransposeExactly) {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    Tensor x = random_tensor(rng, {3, 5});
    Tensor y = random_tensor(rng, {6, 5});
    EXPECT_EQ(cosine_similarity_matrix(x, y), cosine_similarity_matrix(y, x).transposed());
  }
}

TEST(Cosine, ZeroNormRowRejected) {
  Tensor x = Tensor::from_rows({{1, 0}, {0, 0}});
  EXPECT_EQ(error_code_of([&] { cosine_similarity_matrix(x, x); }), ErrorCode::kZeroNorm);
}

TEST(Backward, LinearSum) {
  Tape tape;
  Var x = tape.leaf(Tensor({3}, {0.3, -1.0, 2.0}));
  tape.backward(sum(x));
  EXPECT_EQ(tape.grad(x), Tensor({3}, {1.0, 1.0, 1.0}));
}

TEST(Backward, Quadratic) {
  Tape tape;
  Var x = tape.leaf(Tensor({2}, {1.0, 2.0}));
  tape.backward(sum(mul(x, x)));
  EXPECT_EQ(tape.grad(x), Tensor({2}, {2.0, 4.0}));
}

TEST(Backward, UntouchedLeafGetsZeroGradient) {
  Tape tape;
  Var x = tape.leaf(Tensor({2}, {1.0, 2.0}));
  Var unused = tape.leaf(Tensor({2, 2}, {1.0, 2.0, 3.0, 4.0}));
  tape.backward(sum(x));
  EXPECT_EQ(tape.grad(unused), Tensor::zeros({2, 2}));
}

TEST(Backward, NonScalarOutputRejected) {
  Tape tape;
  Var x = tape.leaf(Tensor({2}, {1.0, 2.0}));
  EXPECT_NE(error_code_of([&] { tape.backward(exp(x)); }), ErrorCode::kOk);
}

TEST(Backward, SoftmaxMatmulCompositeMatchesFiniteDifferences) {
  std::mt19937_64 rng(21);
  Tensor w = random_tensor(rng, {4, 3});
  Tensor weights = random_tensor(rng, {2, 3});
  Tensor x0 = random_tensor(rng, {2, 4});
  GradientReport r = check_gradient(
      [&](Tape& t, Var x) { return frobenius_dot(softmax(matmul(x, t.constant(w)), 1), weights); }, x0);
  EXPECT_LT(r.max_relative_error, 1e-6);
}

TEST(FiniteDifference, Examples) {
  Tensor ones = finite_difference_gradient(
      [](const Tensor& x) {
        double s = 0.0;
        for (double v : x.values()) s += v;
        return s;
      },
      Tensor({4}, {0.1, 0.2, -3.0, 7.0}));
  for (double g : ones.values()) EXPECT_NEAR(g, 1.0, 1e-9);

  Tensor six = finite_difference_gradient([](const Tensor& x) { return x[0] * x[0]; }, Tensor({1}, {3.0}), 1e-5);
  EXPECT_NEAR(six[0], 6.0, 1e-6);
}

TEST(GradientReport, RelativeErrorDefinition) {
  Tensor a({3}, {1.0, 0.0, -2.0});
  Tensor n({3}, {1.1, 1e-9, -2.0});
  // |1 - 1.1| / 1.1, then |0 - 1e-9| / 1e-8 (floor), then 0.
  EXPECT_NEAR(max_relative_error(a, n), 0.1, 1e-15);
  EXPECT_DOUBLE_EQ(max_relative_error(Tensor({1}, {0.0}), Tensor({1}, {1e-9})), 0.1);
}

// One f per primitive. Each reduces to a scalar through a random weighting so
// that every output element receives a distinct cotangent.
struct PrimitiveCase {
  std::string name;
  Shape input;
  std::function<Var(Tape&, Var, std::mt19937_64&)> build;
};

Var weigh(Var y, std::mt19937_64& rng) { return frobenius_dot(y, random_tensor(rng, y.shape())); }

std::vector<PrimitiveCase> primitive_cases() {
  using R = std::mt19937_64;
  auto c = [](Tape& t, R& rng, Shape s) { return t.constant(random_tensor(rng, std::move(s))); };
  return {
      {"matmul_lhs", {3, 4}, [=](Tape& t, Var x, R& g) { return weigh(matmul(x, c(t, g, {4, 2})), g); }},
      {"matmul_rhs", {4, 2}, [=](Tape& t, Var x, R& g) { return weigh(matmul(c(t, g, {3, 4}), x), g); }},
      {"matmul_self", {3, 3}, [](Tape&, Var x, R& g) { return weigh(matmul(x, x), g); }},
      {"transpose", {2, 5}, [](Tape&, Var x, R& g) { return weigh(transpose(x), g); }},
      {"reshape", {2, 6}, [](Tape&, Var x, R& g) { return weigh(reshape(x, {3, 4}), g); }},
      {"add", {3, 2}, [=](Tape& t, Var x, R& g) { return weigh(add(x, c(t, g, {3, 2})), g); }},
      {"sub_lhs", {3, 2}, [=](Tape& t, Var x, R& g) { return weigh(sub(x, c(t, g, {3, 2})), g); }},
      {"sub_rhs", {3, 2}, [=](Tape& t, Var x, R& g) { return weigh(sub(c(t, g, {3, 2}), x), g); }},
      {"mul", {3, 2}, [=](Tape& t, Var x, R& g) { return weigh(mul(x, c(t, g, {3, 2})), g); }},
      {"mul_self", {4}, [](Tape&, Var x, R& g) { return weigh(mul(x, x), g); }},
      {"scale", {2, 3}, [](Tape&, Var x, R& g) { return weigh(scale(x, -1.7), g); }},
      {"add_scalar", {2, 3}, [](Tape&, Var x, R& g) { return weigh(add_scalar(x, 0.4), g); }},
      {"exp", {2, 3}, [](Tape&, Var x, R& g) { return weigh(exp(x), g); }},
      {"tanh", {2, 3}, [](Tape&, Var x, R& g) { return weigh(tanh(x), g); }},
      {"sum", {2, 3}, [](Tape&, Var x, R&) { return scale(sum(mul(x, x)), 0.5); }},
      {"mean", {2, 3}, [](Tape&, Var x, R&) { return mean(exp(x)); }},
      {"mean_rows", {4, 3}, [](Tape&, Var x, R& g) { return weigh(mean_rows(x), g); }},
      {"concat_rows", {2, 3},
       [=](Tape& t, Var x, R& g) {
         std::vector<Var> parts{c(t, g, {1, 3}), x, tanh(x)};
         return weigh(concat_rows(parts), g);
       }},
      {"softmax_rows", {3, 4}, [](Tape&, Var x, R& g) { return weigh(softmax(x, 1), g); }},
      {"softmax_cols", {3, 4}, [](Tape&, Var x, R& g) { return weigh(softmax(x, 0), g); }},
      {"softmax_vector", {5}, [](Tape&, Var x, R& g) { return weigh(softmax(x, 0), g); }},
      {"cross_entropy", {3, 6},
       [](Tape&, Var x, R& g) {
         std::uniform_int_distribution<std::size_t> cls(0, 5);
         std::vector<std::size_t> targets{cls(g), cls(g), cls(g)};
         return cross_entropy(x, targets);
       }},
      {"cosine_lhs", {3, 4}, [=](Tape& t, Var x, R& g) { return weigh(cosine_similarity_matrix(x, c(t, g, {2, 4})), g); }},
      {"cosine_rhs", {2, 4}, [=](Tape& t, Var x, R& g) { return weigh(cosine_similarity_matrix(c(t, g, {3, 4}), x), g); }},
      {"minmax_normalize", {3, 3}, [](Tape&, Var x, R& g) { return weigh(minmax_normalize(x), g); }},
      {"frobenius_dot", {2, 2}, [](Tape&, Var x, R& g) { return weigh(x, g); }},
  };
}

TEST(Primitives, BackwardMatchesFiniteDifferencesOverTenSeeds) {
  for (const PrimitiveCase& pc : primitive_cases()) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      std::mt19937_64 input_rng(1000 + seed);
      Tensor x0 = random_tensor(input_rng, pc.input);
      // The closure is evaluated several times (tape pass plus every finite
      // difference); reseeding keeps its constants identical across calls.
      GradientReport r = check_gradient(
          [&](Tape& t, Var x) {
            std::mt19937_64 rng(seed);
            return pc.build(t, x, rng);
          },
          x0);
      EXPECT_LT(r.max_relative_error, 1e-6) << pc.name << " seed " << seed;
    }
  }
}

TEST(Tape, ReplayIsBitIdentical) {
  auto run = [] {
    std::mt19937_64 rng(77);
    Tape tape;
    Var x = tape.leaf(random_tensor(rng, {4, 3}));
    Var w = tape.leaf(random_tensor(rng, {3, 5}));
    Var y = softmax(matmul(tanh(x), w), 1);
    Var loss = cross_entropy(y, std::vector<std::size_t>{0, 1, 2, 3});
    tape.backward(loss);
    return std::vector<Tensor>{loss.value(), tape.grad(x), tape.grad(w)};
  };
  EXPECT_EQ(run(), run());
}

TEST(Tape, NodesFollowEvaluationOrder) {
  Tape tape;
  Var a = tape.leaf(Tensor::scalar(1.0));
  Var b = exp(a);
  Var c = add(a, b);
  EXPECT_LT(a.id(), b.id());
  EXPECT_LT(b.id(), c.id());
  EXPECT_EQ(tape.size(), 3u);
}

}  // namespace
}  // namespace avalign
