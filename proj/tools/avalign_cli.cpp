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

// Command-line front end. Everything goes through the C interface.

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <iterator>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "CLI11.hpp"
#include "avalign/avalign.h"

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

constexpr int kExitDomain = 1;
constexpr int kExitUsage = 2;

// A failed library call; carries the status into the error JSON.
struct Failure {
  avalign_status status;
  std::string message;
};

void check(avalign_status s) {
  if (s != AVALIGN_OK) throw Failure{s, avalign_last_error()};
}

[[noreturn]] void domain_error(avalign_status s, const std::string& message) { throw Failure{s, message}; }

struct StringDeleter {
  void operator()(char* p) const { avalign_string_free(p); }
};
using CString = std::unique_ptr<char, StringDeleter>;

std::string take(char* p) {
  CString owned(p);
  return p ? std::string(p) : std::string();
}

template <typename T, void (*Free)(T*)>
struct HandleDeleter {
  void operator()(T* p) const { Free(p); }
};
using Matrix = std::unique_ptr<avalign_matrix, HandleDeleter<avalign_matrix, avalign_matrix_free>>;
using Dataset = std::unique_ptr<avalign_dataset, HandleDeleter<avalign_dataset, avalign_dataset_free>>;
using Config = std::unique_ptr<avalign_train_config, HandleDeleter<avalign_train_config, avalign_train_config_free>>;
using Model = std::unique_ptr<avalign_model, HandleDeleter<avalign_model, avalign_model_free>>;
using Training = std::unique_ptr<avalign_training, HandleDeleter<avalign_training, avalign_training_free>>;

struct Globals {
  std::size_t jobs = 1;
  bool quiet = false;
};
Globals g_globals;

void log_event(const json& event) {
  if (!g_globals.quiet) std::cerr << event.dump() << '\n';
}

std::string read_input(const std::string& path) {
  if (path == "-") return std::string(std::istreambuf_iterator<char>(std::cin), {});
  std::ifstream in(path, std::ios::binary);
  if (!in) domain_error(AVALIGN_ERR_IO, "cannot open " + path);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

void write_output(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) domain_error(AVALIGN_ERR_IO, "cannot write " + path.string());
  out << text;
  if (!out) domain_error(AVALIGN_ERR_IO, "write failed: " + path.string());
}

Matrix load_matrix(const std::string& path) {
  avalign_matrix* m = nullptr;
  check(avalign_matrix_parse_csv(read_input(path).c_str(), &m));
  return Matrix(m);
}

std::string matrix_csv(const avalign_matrix* m) {
  char* s = nullptr;
  check(avalign_matrix_to_csv(m, &s));
  return take(s);
}

std::vector<double> load_weights(const std::string& path, std::size_t expected, const char* what) {
  Matrix m = load_matrix(path);
  const std::size_t n = avalign_matrix_rows(m.get()) * avalign_matrix_cols(m.get());
  if (avalign_matrix_rows(m.get()) != 1 && avalign_matrix_cols(m.get()) != 1) {
    domain_error(AVALIGN_ERR_DIMENSION_MISMATCH, std::string(what) + " weights must be a single row or column");
  }
  if (n != expected) {
    domain_error(AVALIGN_ERR_DIMENSION_MISMATCH, std::string(what) + " weights: expected " + std::to_string(expected) +
                                                     " values, found " + std::to_string(n));
  }
  const double* d = avalign_matrix_data(m.get());
  return std::vector<double>(d, d + n);
}

std::string number(double v) { return json(v).dump(); }

avalign_box box_from(const std::vector<double>& v) { return avalign_box{v[0], v[1], v[2], v[3]}; }

json box_json(const avalign_box& b) { return json::array({b.x_left, b.y_top, b.x_right, b.y_bottom}); }

// ---------------------------------------------------------------------------

struct SinkhornArgs {
  std::string cost, image, audio, u, v, plan_out, log_domain = "auto";
  avalign_sinkhorn_config cfg{};
  bool exact = false;
};

void add_sinkhorn(CLI::App& app, std::function<void()>& run) {
  auto a = std::make_shared<SinkhornArgs>();
  avalign_sinkhorn_config_init(&a->cfg);
  auto* sub = app.add_subcommand("sinkhorn", "Transport plan and distance for a cost matrix");
  auto* cost = sub->add_option("--cost", a->cost, "Cost matrix CSV ('-' for stdin)");
  auto* image = sub->add_option("--image", a->image, "Image embeddings CSV; the cost is 1 - cosine similarity");
  auto* audio = sub->add_option("--audio", a->audio, "Audio embeddings CSV");
  image->needs(audio);
  audio->needs(image);
  cost->excludes(image)->excludes(audio);
  sub->add_option("--u", a->u, "Row weights CSV (default uniform)");
  sub->add_option("--v", a->v, "Column weights CSV (default uniform)");
  sub->add_option("--beta", a->cfg.beta, "Kernel decay factor")->capture_default_str();
  sub->add_option("--outer-steps", a->cfg.outer_steps, "Proximal steps")->capture_default_str();
  sub->add_option("--inner-steps", a->cfg.inner_steps, "Scaling sweeps per proximal step")->capture_default_str();
  sub->add_option("--tolerance", a->cfg.marginal_tolerance, "Marginal tolerance")->capture_default_str();
  sub->add_option("--max-iterations", a->cfg.max_total_iterations, "Cap on scaling iterations")->capture_default_str();
  sub->add_option("--log-domain", a->log_domain, "Run the iteration on logarithms")
      ->check(CLI::IsMember({"auto", "always", "never"}))
      ->capture_default_str();
  sub->add_flag("--exact", a->exact, "Solve exactly by basis enumeration (rows + cols <= 10)");
  sub->add_option("--plan-out", a->plan_out, "Write the plan CSV here instead of stdout");
  run = [a, sub] {
    if (a->cost.empty() && a->image.empty()) throw CLI::RequiredError("--cost or --image/--audio");
    Matrix cost;
    if (!a->cost.empty()) {
      cost = load_matrix(a->cost);
    } else {
      Matrix zi = load_matrix(a->image), za = load_matrix(a->audio);
      avalign_matrix* c = nullptr;
      check(avalign_cost_from_embeddings(zi.get(), za.get(), &c));
      cost.reset(c);
    }
    const std::size_t m = avalign_matrix_rows(cost.get()), n = avalign_matrix_cols(cost.get());
    std::optional<std::vector<double>> u, v;
    if (!a->u.empty()) u = load_weights(a->u, m, "row");
    if (!a->v.empty()) v = load_weights(a->v, n, "column");
    a->cfg.log_domain = a->log_domain == "always" ? AVALIGN_LOG_DOMAIN_ALWAYS
                        : a->log_domain == "never" ? AVALIGN_LOG_DOMAIN_NEVER
                                                   : AVALIGN_LOG_DOMAIN_AUTO;
    avalign_matrix* plan = nullptr;
    avalign_ot_stats stats{};
    const double* up = u ? u->data() : nullptr;
    const double* vp = v ? v->data() : nullptr;
    if (a->exact) check(avalign_exact_ot(cost.get(), up, vp, &plan, &stats));
    else check(avalign_sinkhorn(cost.get(), up, vp, &a->cfg, &plan, &stats));
    Matrix owned(plan);
    json log{{"event", "sinkhorn"},
             {"solver", a->exact ? "exact" : "sinkhorn"},
             {"rows", m},
             {"cols", n},
             {"marginal_violation", stats.marginal_violation},
             {"nonzeros", stats.nonzeros}};
    if (a->exact) {
      log["bases_examined"] = stats.bases_examined;
    } else {
      log["outer_steps_run"] = stats.outer_steps_run;
      log["inner_iterations"] = stats.inner_iterations;
      log["log_domain"] = stats.log_domain != 0;
      log["newton_finish"] = stats.newton_finish != 0;
    }
    log_event(log);
    std::string csv = matrix_csv(owned.get());
    if (a->plan_out.empty()) std::cout << csv;
    else write_output(a->plan_out, csv);
    std::cout << "distance," << number(stats.distance) << '\n';
    (void)sub;
  };
}

struct AvaceArgs {
  std::string attention, grad_out;
  std::vector<double> box;
  avalign_avace_config cfg{};
  std::optional<double> eps;
};

void add_avace(CLI::App& app, std::function<void()>& run) {
  auto a = std::make_shared<AvaceArgs>();
  avalign_avace_config_init(&a->cfg);
  auto* sub = app.add_subcommand("avace-loss", "Attention-consistency loss of an attention map against a box");
  sub->add_option("--attention", a->attention, "Attention map CSV with entries in [0,1] ('-' for stdin)")->required();
  sub->add_option("--box", a->box, "x_left,y_top,x_right,y_bottom in [0,1]")->required()->delimiter(',')->expected(4);
  sub->add_option("--lambda1", a->cfg.lambda1, "Weight of the inside-box term")->capture_default_str();
  sub->add_option("--lambda2", a->cfg.lambda2, "Weight of the outside-box term")->capture_default_str();
  sub->add_option("--eps", a->eps, "Stability constant of both terms (default 1e-9)");
  sub->add_option("--grad-out", a->grad_out, "Write the gradient CSV here instead of stdout");
  run = [a] {
    if (a->eps) a->cfg.eps1 = a->cfg.eps2 = *a->eps;
    Matrix att = load_matrix(a->attention);
    avalign_box box = box_from(a->box);
    double loss = 0.0;
    avalign_matrix* grad = nullptr;
    check(avalign_attention_loss(att.get(), &box, &a->cfg, &loss, &grad));
    Matrix owned(grad);
    std::cout << "loss," << number(loss) << '\n';
    std::string csv = matrix_csv(owned.get());
    if (a->grad_out.empty()) std::cout << csv;
    else write_output(a->grad_out, csv);
  };
}

struct ParseArgs {
  std::optional<std::string> box, time, verdict;
};

void add_parse(CLI::App& app, std::function<void()>& run) {
  auto a = std::make_shared<ParseArgs>();
  auto* sub = app.add_subcommand("parse", "Decode a box, time segment or verdict from model text");
  auto* b = sub->add_option("--box", a->box, "Text holding \"[obj,x1,y1,x2,y2]\" ('-' for stdin)");
  auto* t = sub->add_option("--time", a->time, "Text holding \"(tStart,tEnd)\" ('-' for stdin)");
  auto* v = sub->add_option("--verdict", a->verdict, "Text holding true or false ('-' for stdin)");
  b->excludes(t)->excludes(v);
  t->excludes(v);
  sub->require_option(1);
  run = [a] {
    auto text = [](const std::string& s) { return s == "-" ? read_input("-") : s; };
    json out;
    if (a->box) {
      char* label = nullptr;
      avalign_box box{};
      check(avalign_parse_box(text(*a->box).c_str(), &label, &box));
      out = {{"label", take(label)}, {"box", box_json(box)}};
    } else if (a->time) {
      avalign_segment seg{};
      check(avalign_parse_time(text(*a->time).c_str(), &seg));
      out = {{"segment", json::array({seg.t_start, seg.t_end})}};
    } else {
      int verdict = 0;
      check(avalign_parse_verdict(text(*a->verdict).c_str(), &verdict));
      out = {{"verdict", verdict != 0}};
    }
    std::cout << out.dump() << '\n';
  };
}

struct SerializeArgs {
  std::vector<double> box, time;
  std::string label = "obj";
  std::optional<int> precision;
};

void add_serialize(CLI::App& app, std::function<void()>& run) {
  auto a = std::make_shared<SerializeArgs>();
  auto* sub = app.add_subcommand("serialize", "Render a box or time segment in its text form");
  auto* b = sub->add_option("--box", a->box, "x_left,y_top,x_right,y_bottom")->delimiter(',')->expected(4);
  auto* t = sub->add_option("--time", a->time, "t_start,t_end in seconds")->delimiter(',')->expected(2);
  b->excludes(t);
  sub->require_option(1, 3);
  sub->add_option("--label", a->label, "Object label of the box")->capture_default_str();
  sub->add_option("--precision", a->precision, "Decimals (default 2 for boxes, 1 for times)");
  run = [a] {
    char* s = nullptr;
    if (!a->box.empty()) {
      avalign_box box = box_from(a->box);
      check(avalign_serialize_box(a->label.c_str(), &box, a->precision.value_or(2), &s));
    } else if (!a->time.empty()) {
      avalign_segment seg{a->time[0], a->time[1]};
      check(avalign_serialize_time(&seg, a->precision.value_or(1), &s));
    } else {
      throw CLI::RequiredError("--box or --time");
    }
    std::cout << take(s) << '\n';
  };
}

struct RenderArgs {
  std::string text;
  std::vector<std::string> bindings;
  bool list = false;
};

void add_render(CLI::App& app, std::function<void()>& run) {
  auto a = std::make_shared<RenderArgs>();
  auto* sub = app.add_subcommand("render", "Fill the placeholders of an instruction template");
  auto* tmpl = sub->add_option("--template", a->text, "Template text ('-' for stdin)");
  sub->add_option("--bind", a->bindings, "placeholder=value; repeatable (e.g. obj=violin)");
  auto* list = sub->add_flag("--list", a->list, "Print the built-in templates as JSON");
  tmpl->excludes(list);
  run = [a] {
    if (a->list) {
      char* s = nullptr;
      check(avalign_builtin_templates(&s));
      std::cout << take(s) << '\n';
      return;
    }
    if (a->text.empty()) throw CLI::RequiredError("--template");
    json bindings = json::object();
    for (const auto& b : a->bindings) {
      auto eq = b.find('=');
      if (eq == std::string::npos) throw CLI::ValidationError("--bind", "expected placeholder=value, got '" + b + "'");
      bindings[b.substr(0, eq)] = b.substr(eq + 1);
    }
    std::string text = a->text == "-" ? read_input("-") : a->text;
    char* s = nullptr;
    check(avalign_render_instruction(text.c_str(), bindings.dump().c_str(), &s));
    std::cout << take(s) << '\n';
  };
}

void add_seg2bbox(CLI::App& app, std::function<void()>& run) {
  auto path = std::make_shared<std::string>();
  auto* sub = app.add_subcommand("seg2bbox", "Tight normalized box of a binary segmentation mask");
  sub->add_option("--mask", *path, "PGM (P2/P5) or CSV 0/1 mask")->required();
  run = [path] {
    avalign_box box{};
    size_t px[4] = {0, 0, 0, 0};
    check(avalign_seg2bbox_file(path->c_str(), &box, px));
    json out{{"box", box_json(box)},
             {"pixel_box", {{"row_min", px[0]}, {"row_max", px[1]}, {"col_min", px[2]}, {"col_max", px[3]}}}};
    std::cout << out.dump() << '\n';
  };
}

struct PairArgs {
  std::string lookup, images, audios, out;
};

void add_pair(CLI::App& app, std::function<void()>& run) {
  auto a = std::make_shared<PairArgs>();
  auto* sub = app.add_subcommand("pair", "Match image and audio items through the class lookup table");
  sub->add_option("--lookup", a->lookup, "Lookup CSV: image label, audio label, alternative audio label")->required();
  sub->add_option("--images", a->images, "JSONL of {\"id\", \"label\"} image records")->required();
  sub->add_option("--audios", a->audios, "JSONL of {\"id\", \"label\"} audio records")->required();
  sub->add_option("--out", a->out, "Write pairs JSONL here instead of stdout");
  run = [a] {
    char* s = nullptr;
    check(avalign_pair_files(a->lookup.c_str(), a->images.c_str(), a->audios.c_str(), &s));
    std::string pairs = take(s);
    if (a->out.empty()) std::cout << pairs;
    else write_output(a->out, pairs);
  };
}

struct GenArgs {
  std::uint64_t seed = 0;
  std::size_t n = 1000;
  double positive_fraction = 0.5;
  std::string spec, out;
};

void add_gen(CLI::App& app, std::function<void()>& run) {
  auto a = std::make_shared<GenArgs>();
  auto* sub = app.add_subcommand("gen", "Generate a synthetic grounding dataset");
  sub->add_option("--seed", a->seed, "Generator seed")->capture_default_str();
  sub->add_option("--n", a->n, "Number of scenes")->capture_default_str();
  sub->add_option("--positive-fraction", a->positive_fraction, "Share of matched scenes")->capture_default_str();
  sub->add_option("--spec", a->spec, "JSON object overriding scene parameters");
  sub->add_option("--out", a->out, "Dataset file (JSONL)")->required();
  run = [a] {
    std::string spec = a->spec.empty() ? std::string() : read_input(a->spec);
    avalign_dataset* ds = nullptr;
    check(avalign_dataset_generate(a->seed, a->n, a->positive_fraction, a->spec.empty() ? nullptr : spec.c_str(), &ds));
    Dataset owned(ds);
    check(avalign_dataset_write(ds, a->out.c_str()));
    char* s = nullptr;
    check(avalign_dataset_spec(ds, &s));
    json out{{"out", a->out},
             {"seed", a->seed},
             {"scenes", avalign_dataset_size(ds)},
             {"positives", avalign_dataset_positives(ds)},
             {"spec", json::parse(take(s))}};
    std::cout << out.dump() << '\n';
  };
}

struct EvalArgs {
  std::string pred, task, format = "json";
};

std::string metric_table(const json& report) {
  std::ostringstream os;
  os << "task: " << report["task"].get<std::string>() << "  samples: " << report["samples"].get<std::size_t>()
     << "  parse failures: " << report["parse_failures"].get<std::size_t>() << '\n';
  for (const auto& [name, value] : report["metrics"].items()) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%-12s %.6f", name.c_str(), value.get<double>());
    os << buf << '\n';
  }
  for (const auto& [mode, count] : report["failure_modes"].items()) {
    os << "failure " << mode << ": " << count.get<std::size_t>() << '\n';
  }
  return os.str();
}

void add_eval(CLI::App& app, std::function<void()>& run) {
  auto a = std::make_shared<EvalArgs>();
  auto* sub = app.add_subcommand("eval", "Score predictions against ground truth");
  sub->add_option("--pred", a->pred, "JSONL records {\"id\",\"task\",\"pred\",\"gt\"} ('-' for stdin)")->required();
  sub->add_option("--task", a->task, "Require every record to be of this task")
      ->check(CLI::IsMember({"box", "segment", "bool"}));
  sub->add_option("--format", a->format, "Output: JSON report or a text table")
      ->check(CLI::IsMember({"json", "table"}))
      ->capture_default_str();
  run = [a] {
    std::string text = read_input(a->pred);
    char* s = nullptr;
    check(avalign_eval_jsonl(text.c_str(), a->task.empty() ? nullptr : a->task.c_str(), g_globals.jobs, &s));
    std::string report = take(s);
    if (a->format == "json") std::cout << report << '\n';
    else std::cout << metric_table(json::parse(report));
  };
}

// Exposes every training key as --key, applied after the config file.
struct ConfigFlags {
  std::string config_file;
  std::map<std::string, std::string> values;

  // Keys accept the dashed spelling too (--two-stage for two_stage).
  void attach(CLI::App* sub, avalign_config_preset preset) {
    sub->add_option("--config", config_file, "key = value file applied before the flags below");
    avalign_train_config* c = nullptr;
    check(avalign_train_config_new(preset, &c));
    Config defaults(c);
    char* s = nullptr;
    check(avalign_train_config_resolved(c, &s));
    const json current = json::parse(take(s));
    check(avalign_train_config_keys(&s));
    for (const auto& entry : json::parse(take(s))) {
      const std::string key = entry["key"].get<std::string>();
      std::string names = "--" + key;
      std::string dashed = key;
      std::replace(dashed.begin(), dashed.end(), '_', '-');
      if (dashed != key) names += ",--" + dashed;
      sub->add_option_function<std::string>(
             names, [this, key](const std::string& v) { values[key] = v; }, entry["description"].get<std::string>())
          ->type_name("VALUE")
          ->default_str(current.at(key).get<std::string>())
          ->group("Config keys");
    }
  }

  Config resolve(avalign_config_preset preset) const {
    avalign_train_config* c = nullptr;
    check(avalign_train_config_new(preset, &c));
    Config cfg(c);
    if (!config_file.empty()) check(avalign_train_config_apply_text(c, read_input(config_file).c_str()));
    for (const auto& [k, v] : values) check(avalign_train_config_set(c, k.c_str(), v.c_str()));
    return cfg;
  }
};

json resolved(const avalign_train_config* cfg) {
  char* s = nullptr;
  check(avalign_train_config_resolved(cfg, &s));
  return json::parse(take(s));
}

std::string config_text(const json& resolved_cfg) {
  std::string out;
  for (const auto& [k, v] : resolved_cfg.items()) out += k + " = " + v.get<std::string>() + "\n";
  return out;
}

void epoch_logger(const char* epoch_json, void*) {
  json e = json::parse(epoch_json);
  e["event"] = "epoch";
  log_event(e);
}

struct TrainArgs {
  ConfigFlags flags;
  std::string dataset, out;
};

void add_train(CLI::App& app, std::function<void()>& run) {
  auto a = std::make_shared<TrainArgs>();
  auto* sub = app.add_subcommand("train", "Train the toy grounding model");
  sub->add_option("--dataset", a->dataset, "Dataset file written by gen")->required();
  sub->add_option("--out", a->out, "Output directory for curves, checkpoints and summary")->required();
  a->flags.attach(sub, AVALIGN_PRESET_TRAIN);
  run = [a] {
    Config cfg = a->flags.resolve(AVALIGN_PRESET_TRAIN);
    json rc = resolved(cfg.get());
    log_event({{"event", "config"}, {"config", rc}});
    avalign_dataset* d = nullptr;
    check(avalign_dataset_read(a->dataset.c_str(), &d));
    Dataset ds(d);
    avalign_training* t = nullptr;
    check(avalign_train(cfg.get(), ds.get(), epoch_logger, nullptr, &t));
    Training training(t);

    fs::path dir(a->out);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) domain_error(AVALIGN_ERR_IO, "cannot create " + dir.string() + ": " + ec.message());
    write_output(dir / "config.txt", config_text(rc));
    char* s = nullptr;
    check(avalign_training_loss_csv(t, &s));
    write_output(dir / "loss_curve.csv", take(s));
    for (std::size_t i = 0; i < avalign_training_checkpoints(t); ++i) {
      avalign_model* m = nullptr;
      check(avalign_training_checkpoint(t, i, &m));
      Model model(m);
      check(avalign_model_to_json(m, &s));
      write_output(dir / ("checkpoint_epoch" + std::to_string(i + 1) + ".json"), take(s));
    }
    avalign_model* best = nullptr;
    check(avalign_training_best(t, &best));
    Model best_model(best);
    check(avalign_model_to_json(best, &s));
    write_output(dir / "best.json", take(s));
    check(avalign_training_summary(t, &s));
    json summary = json::parse(take(s));
    summary["config"] = rc;
    write_output(dir / "summary.json", summary.dump(2) + "\n");
    std::cout << summary.dump(2) << '\n';
  };
}

struct AblateArgs {
  ConfigFlags flags;
  std::vector<std::uint64_t> seeds;
  std::size_t train_scenes = 2000, test_scenes = 500;
  double positive_fraction = 0.5;
  std::string spec, out;
};

void run_logger(const char* run_json, void*) {
  json r = json::parse(run_json);
  r["event"] = "run";
  log_event(r);
}

void add_ablate(CLI::App& app, std::function<void()>& run) {
  auto a = std::make_shared<AblateArgs>();
  avalign_ablation_options defaults;
  avalign_ablation_options_init(&defaults);
  a->train_scenes = defaults.train_scenes;
  a->test_scenes = defaults.test_scenes;
  a->positive_fraction = defaults.positive_fraction;
  auto* sub = app.add_subcommand("ablate", "Train every loss combination over a seed set and tabulate");
  sub->add_option("--seeds", a->seeds, "Comma separated seeds (default 100..109)")->delimiter(',');
  sub->add_option("--train-scenes", a->train_scenes, "Training scenes per seed")->capture_default_str();
  sub->add_option("--test-scenes", a->test_scenes, "Held-out scenes per seed")->capture_default_str();
  sub->add_option("--positive-fraction", a->positive_fraction, "Share of matched scenes")->capture_default_str();
  sub->add_option("--spec", a->spec, "JSON object overriding scene parameters");
  sub->add_option("--out", a->out, "Directory for table.json and table.md");
  a->flags.attach(sub, AVALIGN_PRESET_ABLATION);
  run = [a] {
    Config cfg = a->flags.resolve(AVALIGN_PRESET_ABLATION);
    log_event({{"event", "config"}, {"config", resolved(cfg.get())}});
    avalign_ablation_options opts;
    avalign_ablation_options_init(&opts);
    opts.train_scenes = a->train_scenes;
    opts.test_scenes = a->test_scenes;
    opts.positive_fraction = a->positive_fraction;
    opts.jobs = g_globals.jobs;
    if (!a->seeds.empty()) {
      opts.seeds = a->seeds.data();
      opts.num_seeds = a->seeds.size();
    }
    std::string spec = a->spec.empty() ? std::string() : read_input(a->spec);
    if (!a->spec.empty()) opts.spec_json = spec.c_str();
    char* table = nullptr;
    char* md = nullptr;
    check(avalign_ablate(cfg.get(), &opts, run_logger, nullptr, &table, &md));
    std::string table_json = take(table), markdown = take(md);
    if (!a->out.empty()) {
      std::error_code ec;
      fs::create_directories(a->out, ec);
      if (ec) domain_error(AVALIGN_ERR_IO, "cannot create " + a->out + ": " + ec.message());
      write_output(fs::path(a->out) / "table.json", table_json + "\n");
      write_output(fs::path(a->out) / "table.md", markdown);
    }
    std::cout << markdown;
  };
}

struct GradArgs {
  std::string target;
  std::uint64_t seed = 0;
  double h = 1e-5;
  bool full = false;
};

void add_gradcheck(CLI::App& app, std::function<void()>& run) {
  auto a = std::make_shared<GradArgs>();
  auto* sub = app.add_subcommand("gradcheck", "Compare analytic gradients with central differences");
  sub->add_option("--target", a->target, "composite, avace, ot or objective")
      ->required()
      ->check(CLI::IsMember({"composite", "avace", "ot", "objective"}));
  sub->add_option("--seed", a->seed, "Instance seed")->capture_default_str();
  sub->add_option("--step", a->h, "Finite-difference step h")->capture_default_str();
  sub->add_flag("--full", a->full, "Include both gradients in the report");
  run = [a] {
    int passed = 0;
    char* s = nullptr;
    check(avalign_gradcheck(a->target.c_str(), a->seed, a->h, &passed, &s));
    json report = json::parse(take(s));
    if (!a->full) {
      report.erase("analytic");
      report.erase("numeric");
    }
    std::cout << report.dump(2) << '\n';
    if (!passed) {
      domain_error(AVALIGN_ERR_NON_CONVERGENCE,
                   "gradient mismatch: max relative error " + number(report["max_relative_error"].get<double>()) +
                       " is not below " + number(report["tolerance"].get<double>()));
    }
  };
}

void print_error(avalign_status status, const std::string& message) {
  json err{{"error", avalign_status_name(status)}, {"code", static_cast<int>(status)}, {"message", message}};
  std::cerr << err.dump() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Audio-visual alignment toolkit: optimal transport, attention consistency, grounding codecs and metrics"};
  app.name("avalign");
  app.set_version_flag("--version", std::string(avalign_version()));
  app.require_subcommand(1);
  app.fallthrough();
  app.add_option("--jobs", g_globals.jobs, "Worker threads for eval and ablate")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  app.add_flag("--quiet", g_globals.quiet, "Suppress JSON log lines on stderr");

  std::map<std::string, std::function<void()>> runners;
  auto reg = [&](void (*add)(CLI::App&, std::function<void()>&)) {
    std::function<void()> run;
    add(app, run);
    runners[app.get_subcommands({}).back()->get_name()] = std::move(run);
  };
  reg(add_sinkhorn);
  reg(add_avace);
  reg(add_parse);
  reg(add_serialize);
  reg(add_render);
  reg(add_seg2bbox);
  reg(add_pair);
  reg(add_gen);
  reg(add_eval);
  reg(add_train);
  reg(add_ablate);
  reg(add_gradcheck);

  try {
    app.parse(argc, argv);
    runners.at(app.get_subcommands().front()->get_name())();
    return 0;
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  } catch (const Failure& f) {
    print_error(f.status, f.message);
    return kExitDomain;
  } catch (const json::exception& e) {
    print_error(AVALIGN_ERR_PARSE, e.what());
    return kExitDomain;
  } catch (const std::exception& e) {
    print_error(AVALIGN_ERR_INTERNAL, e.what());
    return kExitDomain;
  }
}
