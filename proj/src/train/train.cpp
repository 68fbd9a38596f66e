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

#include "train/train.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <mutex>
#include <numbers>
#include <random>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "error.hpp"
#include "metrics/metrics.hpp"

namespace avalign {

// ---------------------------------------------------------------------------
// Configuration.

void TrainConfig::validate() const {
  if (!(base_lr > 0.0) || !std::isfinite(base_lr)) fail(ErrorCode::kInvalidArgument, "base_lr must be positive");
  if (!(warmup_ratio > 0.0 && warmup_ratio < 1.0)) fail(ErrorCode::kInvalidArgument, "warmup_ratio must be in (0, 1)");
  if (epochs < 1 || grad_accumulation < 1 || batch_size < 1) {
    fail(ErrorCode::kInvalidArgument, "epochs, grad_accumulation and batch_size must be >= 1");
  }
  if (!(lambda_ot >= 0.0) || !(lambda_ac >= 0.0)) fail(ErrorCode::kInvalidArgument, "loss weights must be >= 0");
  if (!(weight_decay >= 0.0)) fail(ErrorCode::kInvalidArgument, "weight_decay must be >= 0");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0) || !(adam_eps > 0.0)) {
    fail(ErrorCode::kInvalidArgument, "invalid Adam constants");
  }
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) fail(ErrorCode::kInvalidArgument, "val_fraction must be in (0, 1)");
  if (two_stage && stage1_epochs >= epochs) fail(ErrorCode::kInvalidArgument, "stage1_epochs must be < epochs");
  if (embed_dim < 1 || attn_dim < 1 || adapter_rank < 1) {
    fail(ErrorCode::kInvalidArgument, "embed_dim, attn_dim and adapter_rank must be >= 1");
  }
  avace.validate();
  sinkhorn.validate();
}

LossConfig TrainConfig::loss_config() const {
  LossConfig c;
  c.weights.lambda_ot = lambda_ot;
  c.weights.lambda_ac = lambda_ac;
  c.avace = avace;
  c.sinkhorn = sinkhorn;
  return c;
}

namespace {

struct OptionDef {
  const char* key;
  const char* help;
  std::function<void(TrainConfig&, const std::string&)> set;
  std::function<std::string(const TrainConfig&)> get;
};

double to_double(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double d = 0.0;
  try {
    d = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != v.size() || !std::isfinite(d)) fail(ErrorCode::kParse, key + ": '" + v + "' is not a number");
  return d;
}

std::uint64_t to_uint(const std::string& key, const std::string& v) {
  if (v.empty() || v.find_first_not_of("0123456789") != std::string::npos) {
    fail(ErrorCode::kParse, key + ": '" + v + "' is not a non-negative integer");
  }
  try {
    return std::stoull(v);
  } catch (const std::exception&) {
    fail(ErrorCode::kParse, key + ": '" + v + "' is out of range");
  }
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  fail(ErrorCode::kParse, key + ": '" + v + "' is not a boolean");
}

// Shortest text that reads back to the same double.
std::string num(double d) {
  char buf[32];
  auto r = std::to_chars(buf, buf + sizeof buf, d);
  return std::string(buf, r.ptr);
}

#define AV_DOUBLE(name, field, help)                                                                  \
  OptionDef{name, help, [](TrainConfig& c, const std::string& v) { c.field = to_double(name, v); }, \
            [](const TrainConfig& c) { return num(c.field); }}
#define AV_UINT(name, field, type, help)                                                                     \
  OptionDef{name, help, [](TrainConfig& c, const std::string& v) { c.field = static_cast<type>(to_uint(name, v)); }, \
            [](const TrainConfig& c) { return std::to_string(c.field); }}

const std::vector<OptionDef>& option_defs() {
  static const std::vector<OptionDef> defs = {
      AV_DOUBLE("base_lr", base_lr, "peak learning rate"),
      AV_DOUBLE("warmup_ratio", warmup_ratio, "fraction of steps spent in linear warmup"),
      AV_UINT("epochs", epochs, std::size_t, "passes over the training split"),
      AV_UINT("grad_accumulation", grad_accumulation, std::size_t, "micro-batches per optimizer step"),
      AV_UINT("batch_size", batch_size, std::size_t, "scenes per micro-batch"),
      AV_DOUBLE("lambda_ot", lambda_ot, "weight of the transport loss"),
      AV_DOUBLE("lambda_ac", lambda_ac, "weight of the attention-consistency loss"),
      AV_UINT("seed", seed, std::uint64_t, "model initialisation and shuffling seed"),
      AV_DOUBLE("weight_decay", weight_decay, "decoupled weight decay"),
      AV_DOUBLE("adam_beta1", adam_beta1, "first-moment decay"),
      AV_DOUBLE("adam_beta2", adam_beta2, "second-moment decay"),
      AV_DOUBLE("adam_eps", adam_eps, "denominator offset"),
      AV_DOUBLE("val_fraction", val_fraction, "share of scenes held out for validation"),
      OptionDef{"two_stage", "train the transport loss alone for stage1_epochs first",
                [](TrainConfig& c, const std::string& v) { c.two_stage = to_bool("two_stage", v); },
                [](const TrainConfig& c) { return std::string(c.two_stage ? "true" : "false"); }},
      AV_UINT("stage1_epochs", stage1_epochs, std::size_t, "epochs of stage I when two_stage is set"),
      AV_UINT("embed_dim", embed_dim, std::size_t, "embedding width D"),
      AV_UINT("attn_dim", attn_dim, std::size_t, "attention width Da"),
      AV_UINT("adapter_rank", adapter_rank, std::size_t, "rank of the encoder adapters"),
      AV_DOUBLE("lambda1", avace.lambda1, "inside-box weight of the attention loss"),
      AV_DOUBLE("lambda2", avace.lambda2, "outside-box weight of the attention loss"),
      AV_DOUBLE("eps1", avace.eps1, "inside-box stabiliser"),
      AV_DOUBLE("eps2", avace.eps2, "outside-box stabiliser"),
      AV_DOUBLE("sinkhorn_beta", sinkhorn.beta, "kernel decay beta"),
      AV_UINT("sinkhorn_outer_steps", sinkhorn.outer_steps, int, "proximal steps"),
      AV_UINT("sinkhorn_inner_steps", sinkhorn.inner_steps, int, "scaling sweeps per proximal step"),
      AV_DOUBLE("sinkhorn_tolerance", sinkhorn.marginal_tolerance, "marginal tolerance"),
      AV_UINT("sinkhorn_max_iterations", sinkhorn.max_total_iterations, int, "cap on scaling iterations"),
  };
  return defs;
}

#undef AV_DOUBLE
#undef AV_UINT

}  // namespace

const std::vector<std::pair<std::string, std::string>>& train_config_keys() {
  static const std::vector<std::pair<std::string, std::string>> keys = [] {
    std::vector<std::pair<std::string, std::string>> k;
    for (const auto& d : option_defs()) k.emplace_back(d.key, d.help);
    return k;
  }();
  return keys;
}

void set_train_option(TrainConfig& cfg, const std::string& key, const std::string& value) {
  for (const auto& d : option_defs()) {
    if (key == d.key) {
      d.set(cfg, value);
      return;
    }
  }
  fail(ErrorCode::kUnknownKey, "unknown config key '" + key + "'");
}

void apply_config_text(TrainConfig& cfg, const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  auto trim = [](std::string s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return std::string();
    return s.substr(a, s.find_last_not_of(" \t\r") - a + 1);
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) fail(ErrorCode::kParse, "config line " + std::to_string(lineno) + ": expected key=value");
    try {
      set_train_option(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const Error& e) {
      fail(e.code(), "config line " + std::to_string(lineno) + ": " + e.what());
    }
  }
}

std::vector<std::pair<std::string, std::string>> resolved_config(const TrainConfig& cfg) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& d : option_defs()) out.emplace_back(d.key, d.get(cfg));
  return out;
}

// ---------------------------------------------------------------------------
// Schedule.

std::size_t warmup_steps(std::size_t total_steps, double warmup_ratio) {
  return static_cast<std::size_t>(std::ceil(warmup_ratio * static_cast<double>(total_steps)));
}

double lr_at(std::size_t step, std::size_t total_steps, double base_lr, double warmup_ratio) {
  if (step > total_steps) fail(ErrorCode::kInvalidArgument, "lr_at: step beyond the schedule");
  const std::size_t warm = warmup_steps(total_steps, warmup_ratio);
  if (step < warm) return base_lr * static_cast<double>(step) / static_cast<double>(warm);
  if (total_steps == warm) return base_lr;
  double progress = static_cast<double>(step - warm) / static_cast<double>(total_steps - warm);
  return base_lr * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

// ---------------------------------------------------------------------------
// Training.

namespace {

struct StepAccumulator {
  std::vector<std::vector<double>> grads;
  std::size_t scenes = 0;
  double loss = 0.0;

  explicit StepAccumulator(const ToyModel& m) {
    for (const auto& p : m.params()) grads.emplace_back(p.size(), 0.0);
  }
  void clear() {
    for (auto& g : grads) std::fill(g.begin(), g.end(), 0.0);
    scenes = 0;
    loss = 0.0;
  }
};

class AdamW {
 public:
  AdamW(const ToyModel& m, const TrainConfig& cfg) : cfg_(cfg) {
    for (const auto& p : m.params()) {
      m_.emplace_back(p.size(), 0.0);
      v_.emplace_back(p.size(), 0.0);
    }
  }

  void step(ToyModel& model, const StepAccumulator& acc, double lr) {
    ++t_;
    const double b1 = cfg_.adam_beta1, b2 = cfg_.adam_beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
    const double inv = 1.0 / static_cast<double>(acc.scenes);
    auto& params = model.params();
    for (std::size_t p = 0; p < params.size(); ++p) {
      std::vector<double> w(params[p].data());
      for (std::size_t i = 0; i < w.size(); ++i) {
        double g = acc.grads[p][i] * inv;
        m_[p][i] = b1 * m_[p][i] + (1.0 - b1) * g;
        v_[p][i] = b2 * v_[p][i] + (1.0 - b2) * g * g;
        double update = (m_[p][i] / c1) / (std::sqrt(v_[p][i] / c2) + cfg_.adam_eps);
        w[i] -= lr * (update + cfg_.weight_decay * w[i]);
      }
      params[p] = Tensor(params[p].shape(), std::move(w));
    }
  }

 private:
  const TrainConfig& cfg_;
  std::vector<std::vector<double>> m_, v_;
  std::size_t t_ = 0;
};

void add_parts(LossBreakdown& into, const LossBreakdown& x) {
  into.l_ce += x.l_ce;
  into.l_ot += x.l_ot;
  into.l_ac += x.l_ac;
  into.total += x.total;
}

LossBreakdown scaled(LossBreakdown b, double f) {
  b.l_ce *= f;
  b.l_ot *= f;
  b.l_ac *= f;
  b.total *= f;
  return b;
}

[[noreturn]] void nan_abort(std::size_t epoch, std::size_t step, const SyntheticScene& s, const std::string& what) {
  fail(ErrorCode::kNanLoss, "non-finite loss at epoch " + std::to_string(epoch) + ", step " + std::to_string(step) +
                                ", scene " + s.id + ": " + what);
}

// Runs one scene; with acc set the gradient is accumulated.
LossBreakdown run_scene(const ToyModel& model, const SyntheticScene& scene, const LossConfig& lc,
                        StepAccumulator* acc, std::size_t epoch, std::size_t step) {
  Tape tape;
  std::vector<Var> params;
  for (const Tensor& t : model.params()) params.push_back(acc ? tape.leaf(t) : tape.constant(t));
  SceneLoss loss;
  try {
    loss = scene_loss(model, params, scene, lc);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kNonFinite) nan_abort(epoch, step, scene, e.what());
    throw;
  }
  const LossBreakdown& b = loss.parts;
  if (!std::isfinite(b.total)) {
    std::ostringstream os;
    os << "ce=" << b.l_ce << " ot=" << b.l_ot << " ac=" << b.l_ac;
    nan_abort(epoch, step, scene, os.str());
  }
  if (acc) {
    tape.backward(loss.total);
    for (std::size_t p = 0; p < params.size(); ++p) {
      Tensor g = tape.grad(params[p]);
      auto& dst = acc->grads[p];
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += g[i];
    }
    ++acc->scenes;
    acc->loss += b.total;
  }
  return b;
}

}  // namespace

TrainResult train(const TrainConfig& cfg, const std::vector<SyntheticScene>& scenes, const ModelDims& dims,
                  const std::function<void(const EpochLog&)>& on_epoch) {
  cfg.validate();
  const std::size_t n = scenes.size();
  const std::size_t n_val = static_cast<std::size_t>(std::lround(cfg.val_fraction * static_cast<double>(n)));
  if (n < 2 || n_val < 1 || n_val >= n) fail(ErrorCode::kInvalidArgument, "train: dataset too small for a train/val split");
  const std::size_t n_train = n - n_val;

  const std::size_t micro_per_epoch = (n_train + cfg.batch_size - 1) / cfg.batch_size;
  const std::size_t steps_per_epoch = (micro_per_epoch + cfg.grad_accumulation - 1) / cfg.grad_accumulation;
  TrainResult result;
  result.total_steps = steps_per_epoch * cfg.epochs;

  ToyModel model = ToyModel::init(dims, cfg.seed);
  AdamW opt(model, cfg);
  StepAccumulator acc(model);
  std::mt19937_64 shuffle_rng(cfg.seed ^ 0x7a11c0ffeeULL);
  std::vector<std::size_t> order(n_train);
  for (std::size_t i = 0; i < n_train; ++i) order[i] = i;

  const LossConfig full = cfg.loss_config();
  LossConfig stage1 = full;
  stage1.weights.lambda_ac = 0.0;

  double best_val = std::numeric_limits<double>::infinity();
  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const bool first_stage = cfg.two_stage && epoch < cfg.stage1_epochs;
    const LossConfig& lc = first_stage ? stage1 : full;
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    EpochLog log;
    log.epoch = epoch + 1;
    std::size_t micro = 0;
    for (std::size_t start = 0; start < n_train; start += cfg.batch_size) {
      const std::size_t stop = std::min(start + cfg.batch_size, n_train);
      for (std::size_t k = start; k < stop; ++k) {
        const SyntheticScene& s = scenes[order[k]];
        LossBreakdown b;
        if (first_stage) {
          // Stage I: only the transport term drives the update.
          b = run_scene(model, s, lc, nullptr, epoch, step);
          LossConfig ot_only = lc;
          Tape tape;
          std::vector<Var> params;
          for (const Tensor& t : model.params()) params.push_back(tape.leaf(t));
          ForwardResult f = forward(model, params, tape.constant(s.image), tape.constant(s.audio));
          Var ot = ot_loss(f.z_image, f.z_audio, ot_only.sinkhorn);
          tape.backward(ot);
          for (std::size_t p = 0; p < params.size(); ++p) {
            Tensor g = tape.grad(params[p]);
            for (std::size_t i = 0; i < g.size(); ++i) acc.grads[p][i] += g[i];
          }
          ++acc.scenes;
          acc.loss += ot.value().item();
        } else {
          b = run_scene(model, s, lc, &acc, epoch, step);
        }
        add_parts(log.train, b);
      }
      ++micro;
      if (micro % cfg.grad_accumulation == 0 || stop == n_train) {
        double lr = lr_at(step + 1, result.total_steps, cfg.base_lr, cfg.warmup_ratio);
        opt.step(model, acc, lr);
        result.step_losses.push_back(acc.loss / static_cast<double>(acc.scenes));
        log.lr_end = lr;
        acc.clear();
        ++step;
      }
    }
    log.train = scaled(log.train, 1.0 / static_cast<double>(n_train));
    for (std::size_t k = n_train; k < n; ++k) add_parts(log.val, run_scene(model, scenes[k], full, nullptr, epoch, step));
    log.val = scaled(log.val, 1.0 / static_cast<double>(n_val));
    result.checkpoints.push_back(model);
    if (log.val.total < best_val) {
      best_val = log.val.total;
      result.best = model;
      result.best_epoch = epoch + 1;
    }
    result.epochs.push_back(log);
    if (on_epoch) on_epoch(log);
  }
  return result;
}

HeldOutMetrics evaluate_model(const ToyModel& model, const std::vector<SyntheticScene>& scenes) {
  std::vector<EvalSample> boxes, segments, verdicts;
  HeldOutMetrics m;
  for (const auto& s : scenes) {
    Decoded d = decode(predict_logits(model, s));
    if (s.is_positive) {
      Prediction p = d.box ? Prediction(*d.box) : Prediction(ParseFailure{d.box_status, d.box_text});
      if (!d.box) ++m.box_parse_failures;
      boxes.push_back(make_sample(s.id, p, s.gt_box));
    }
    Prediction t = d.segment ? Prediction(*d.segment) : Prediction(ParseFailure{d.time_status, d.time_text});
    segments.push_back(make_sample(s.id, t, s.gt_segment));
    verdicts.push_back(make_sample(s.id, d.verdict, s.is_positive));
  }
  if (!boxes.empty()) {
    m.ciou = ciou_at(boxes, 0.5);
    m.auc = auc(boxes);
  }
  if (!segments.empty()) m.segment_f1 = segment_f1(segments, 0.5);
  if (!verdicts.empty()) {
    BinaryScores b = binary_prf(verdicts);
    m.verdict_f1 = b.f1;
    m.verdict_accuracy = b.accuracy;
  }
  return m;
}

// ---------------------------------------------------------------------------
// Ablation.

std::vector<std::string> AblationTable::combos() const {
  std::vector<std::string> out;
  for (const auto& r : runs) {
    if (std::find(out.begin(), out.end(), r.combo) == out.end()) out.push_back(r.combo);
  }
  return out;
}

std::vector<const AblationRun*> AblationTable::runs_for(const std::string& combo) const {
  std::vector<const AblationRun*> out;
  for (const auto& r : runs) {
    if (r.combo == combo) out.push_back(&r);
  }
  return out;
}

double median(std::vector<double> v) {
  if (v.empty()) fail(ErrorCode::kInvalidArgument, "median of an empty set");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

AblationTable run_ablation(const AblationConfig& cfg, const std::function<void(const AblationRun&)>& on_run) {
  if (cfg.seeds.empty()) fail(ErrorCode::kInvalidArgument, "ablation needs at least one seed");
  cfg.train.validate();
  struct Combo {
    const char* name;
    bool ot, ac;
  };
  const Combo combos[] = {{"ce", false, false}, {"ce+ot", true, false}, {"ce+ac", false, true}, {"ce+ot+ac", true, true}};
  const ModelDims dims = ModelDims::for_scenes(cfg.scenes, cfg.train.embed_dim, cfg.train.attn_dim, cfg.train.adapter_rank);

  AblationTable table;
  table.runs.resize(4 * cfg.seeds.size());
  std::mutex report_mutex;
  for (std::size_t si = 0; si < cfg.seeds.size(); ++si) {
    const std::uint64_t seed = cfg.seeds[si];
    const auto train_set = generate_dataset(seed, cfg.train_scenes, cfg.positive_fraction, cfg.scenes, 0);
    const auto test_set =
        generate_dataset(seed, cfg.test_scenes, cfg.positive_fraction, cfg.scenes, cfg.train_scenes);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
      for (std::size_t c; (c = next++) < 4;) {
        TrainConfig tc = cfg.train;
        tc.seed = seed;
        tc.lambda_ot = combos[c].ot ? cfg.train.lambda_ot : 0.0;
        tc.lambda_ac = combos[c].ac ? cfg.train.lambda_ac : 0.0;
        auto t0 = std::chrono::steady_clock::now();
        TrainResult r = train(tc, train_set, dims);
        AblationRun run;
        run.combo = combos[c].name;
        run.seed = seed;
        run.lambda_ot = tc.lambda_ot;
        run.lambda_ac = tc.lambda_ac;
        run.metrics = evaluate_model(r.best, test_set);
        run.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::lock_guard<std::mutex> lock(report_mutex);
        table.runs[c * cfg.seeds.size() + si] = run;
        if (on_run) on_run(run);
      }
    };
    const std::size_t jobs = std::clamp<std::size_t>(cfg.jobs, 1, 4);
    std::vector<std::thread> threads;
    for (std::size_t j = 1; j < jobs; ++j) threads.emplace_back(worker);
    worker();
    for (auto& t : threads) t.join();
  }
  return table;
}

std::string ablation_markdown(const AblationTable& t) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(4);
  os << "| losses | lambda_ot | lambda_ac | cIoU@0.5 median | cIoU@0.5 mean | AUC mean | seg F1@0.5 median | seeds |\n";
  os << "|---|---|---|---|---|---|---|---|\n";
  for (const auto& combo : t.combos()) {
    auto runs = t.runs_for(combo);
    std::vector<double> ciou, auc_v, f1;
    for (const auto* r : runs) {
      ciou.push_back(r->metrics.ciou);
      auc_v.push_back(r->metrics.auc);
      f1.push_back(r->metrics.segment_f1);
    }
    auto mean = [](const std::vector<double>& v) {
      double s = 0.0;
      for (double x : v) s += x;
      return s / static_cast<double>(v.size());
    };
    os << "| " << combo << " | " << runs.front()->lambda_ot << " | " << runs.front()->lambda_ac << " | "
       << median(ciou) << " | " << mean(ciou) << " | " << mean(auc_v) << " | " << median(f1) << " | " << runs.size()
       << " |\n";
  }
  auto base = t.runs_for("ce"), fullr = t.runs_for("ce+ot+ac");
  if (!base.empty() && base.size() == fullr.size()) {
    std::size_t wins = 0;
    for (std::size_t i = 0; i < base.size(); ++i) wins += fullr[i]->metrics.ciou > base[i]->metrics.ciou;
    os << "\nce+ot+ac beats ce on cIoU@0.5 in " << wins << "/" << base.size() << " seeds\n";
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// Serialization.

std::string model_to_json(const ToyModel& model) {
  using nlohmann::json;
  const ModelDims& d = model.dims();
  json j;
  j["dims"] = {{"feature_dim", d.feature_dim}, {"embed_dim", d.embed_dim},   {"attn_dim", d.attn_dim}, {"adapter_rank", d.adapter_rank},
               {"grid_height", d.grid_height}, {"grid_width", d.grid_width}, {"audio_tokens", d.audio_tokens}};
  json params = json::object();
  const auto& names = ToyModel::param_names();
  for (std::size_t p = 0; p < model.params().size(); ++p) {
    params[names[p]] = {{"shape", model.params()[p].shape()}, {"values", model.params()[p].data()}};
  }
  j["params"] = params;
  return j.dump();
}

ToyModel model_from_json(const std::string& text) {
  using nlohmann::json;
  try {
    json j = json::parse(text);
    ModelDims d;
    const json& jd = j.at("dims");
    d.feature_dim = jd.at("feature_dim").get<std::size_t>();
    d.embed_dim = jd.at("embed_dim").get<std::size_t>();
    d.attn_dim = jd.at("attn_dim").get<std::size_t>();
    d.adapter_rank = jd.at("adapter_rank").get<std::size_t>();
    d.grid_height = jd.at("grid_height").get<std::size_t>();
    d.grid_width = jd.at("grid_width").get<std::size_t>();
    d.audio_tokens = jd.at("audio_tokens").get<std::size_t>();
    ToyModel m = ToyModel::zeros(d);
    const auto& names = ToyModel::param_names();
    for (std::size_t p = 0; p < names.size(); ++p) {
      const json& jp = j.at("params").at(names[p]);
      Shape shape = jp.at("shape").get<Shape>();
      if (shape != m.params()[p].shape()) fail(ErrorCode::kParse, "checkpoint: shape mismatch for " + names[p]);
      m.params()[p] = Tensor(shape, jp.at("values").get<std::vector<double>>());
    }
    return m;
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    fail(ErrorCode::kParse, std::string("checkpoint: ") + e.what());
  }
}

}  // namespace avalign
