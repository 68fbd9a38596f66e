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

#include "train/checks.hpp"

#include <random>

#include "avace/avace.hpp"
#include "error.hpp"
#include "ot/ot.hpp"
#include "train/model.hpp"

namespace avalign {

namespace {

Tensor random_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(rows * cols);
  for (double& x : v) x = u(rng);
  return Tensor({rows, cols}, std::move(v));
}

GradcheckOutcome check_composite(std::uint64_t seed, double h) {
  std::mt19937_64 rng(seed);
  Tensor x = random_matrix(3, 4, rng);
  Tensor w = random_matrix(4, 5, rng);
  Tensor r = random_matrix(3, 5, rng);
  GradcheckOutcome out;
  out.wrt = "x (3x4) in sum(r * softmax(x w, axis 1))";
  out.report = check_gradient(
      [&](Tape& t, Var leaf) { return frobenius_dot(softmax(matmul(leaf, t.constant(w)), 1), r); }, x, h);
  return out;
}

GradcheckOutcome check_avace(std::uint64_t seed, double h) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> side(2, 6);
  GridShape grid{side(rng), side(rng)};
  Tensor a = random_matrix(grid.height, grid.width, rng, 0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double x0 = 0.5 * u(rng), y0 = 0.5 * u(rng);
  BoundingBox box = make_box(x0, y0, x0 + 0.3 + 0.2 * u(rng), y0 + 0.3 + 0.2 * u(rng));
  Tensor mask = rasterize_mask(box, grid).grid;
  AvaceConfig cfg;
  GradcheckOutcome out;
  out.wrt = "attention map (" + std::to_string(grid.height) + "x" + std::to_string(grid.width) + ")";
  out.report = check_gradient([&](Tape&, Var leaf) { return attention_consistency_loss(leaf, mask, cfg); }, a, h);
  return out;
}

GradcheckOutcome check_ot(std::uint64_t seed, double h) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> count(2, 6);
  std::size_t m = count(rng), n = count(rng), d = 4;
  Tensor zi = random_matrix(m, d, rng), za = random_matrix(n, d, rng);
  SinkhornConfig cfg;
  Tape tape;
  Var leaf = tape.leaf(zi);
  SinkhornResult solved;
  tape.backward(ot_loss(leaf, tape.constant(za), cfg, &solved));
  GradcheckOutcome out;
  out.wrt = "image embeddings (" + std::to_string(m) + "x" + std::to_string(d) + "), plan held fixed";
  out.report.analytic = tape.grad(leaf);
  out.report.numeric = finite_difference_gradient(
      [&](const Tensor& probe) { return frozen_plan_loss(probe, za, solved.plan.entries); }, zi, h);
  out.report.max_relative_error = max_relative_error(out.report.analytic, out.report.numeric);
  return out;
}

// A small model with every tensor random, so that no parameter sits behind a
// zero head.
GradcheckOutcome check_objective(std::uint64_t seed, double h) {
  SceneSpec spec;
  spec.grid_height = 3;
  spec.grid_width = 3;
  spec.num_classes = 4;
  spec.feature_dim = 7;
  spec.audio_tokens = 6;
  spec.min_segment = 2;
  spec.max_segment = 4;
  ModelDims dims = ModelDims::for_scenes(spec, 5, 4, 3);
  std::mt19937_64 rng(seed);
  ToyModel model = ToyModel::init(dims, seed);
  for (Tensor& p : model.params()) {
    Tensor noise = random_matrix(p.rows(), p.cols(), rng, -0.5, 0.5);
    std::vector<double> v(p.data());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] += noise[i];
    p = Tensor(p.shape(), std::move(v));
  }
  SyntheticScene scene = generate_scene(seed, 0, true, spec);
  std::size_t which = std::uniform_int_distribution<std::size_t>(0, kNumParams - 1)(rng);

  LossConfig cfg;
  auto register_params = [&](Tape& t, const Tensor* replaced, Var* leaf) {
    std::vector<Var> vars;
    for (std::size_t p = 0; p < kNumParams; ++p) {
      if (p == which && leaf) {
        *leaf = t.leaf(model.params()[p]);
        vars.push_back(*leaf);
      } else {
        vars.push_back(t.constant(p == which && replaced ? *replaced : model.params()[p]));
      }
    }
    return vars;
  };

  Tape tape;
  Var leaf;
  std::vector<Var> vars = register_params(tape, nullptr, &leaf);
  SceneLoss solved = scene_loss(model, vars, scene, cfg);
  tape.backward(solved.total);
  const Tensor plan = solved.plan.plan.entries;

  GradcheckOutcome out;
  out.wrt = ToyModel::param_names()[which] + " " + shape_string(model.params()[which].shape()) +
            ", plan held fixed";
  out.report.analytic = tape.grad(leaf);
  out.report.numeric = finite_difference_gradient(
      [&](const Tensor& probe) {
        Tape t;
        std::vector<Var> v = register_params(t, &probe, nullptr);
        return scene_loss(model, v, scene, cfg, &plan).parts.total;
      },
      model.params()[which], h);
  out.report.max_relative_error = max_relative_error(out.report.analytic, out.report.numeric);
  return out;
}

}  // namespace

const std::vector<GradcheckTarget>& gradcheck_targets() {
  static const std::vector<GradcheckTarget> targets = {
      {"composite", "softmax of a matrix product against fixed weights", 1e-6},
      {"avace", "attention-consistency loss with respect to the attention map", 1e-4},
      {"ot", "transport loss with respect to the image embeddings", 1e-4},
      {"objective", "combined training loss with respect to one model parameter", 1e-3},
  };
  return targets;
}

const GradcheckTarget& find_gradcheck_target(std::string_view name) {
  for (const auto& t : gradcheck_targets()) {
    if (t.name == name) return t;
  }
  fail(ErrorCode::kInvalidArgument, "unknown gradcheck target '" + std::string(name) + "'");
}

GradcheckOutcome run_gradcheck(std::string_view target, std::uint64_t seed, double h) {
  const GradcheckTarget& t = find_gradcheck_target(target);
  GradcheckOutcome out;
  if (t.name == "composite") out = check_composite(seed, h);
  else if (t.name == "avace") out = check_avace(seed, h);
  else if (t.name == "ot") out = check_ot(seed, h);
  else out = check_objective(seed, h);
  out.target = t;
  out.seed = seed;
  return out;
}

}  // namespace avalign
