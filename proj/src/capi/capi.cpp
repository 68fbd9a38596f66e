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

#include "avalign/avalign.h"

#include <cstdlib>
#include <cstring>
#include <exception>
#include <fstream>
#include <new>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "avace/avace.hpp"
#include "codec/codec.hpp"
#include "data/data.hpp"
#include "error.hpp"
#include "io/io.hpp"
#include "metrics/metrics.hpp"
#include "ot/ot.hpp"
#include "train/checks.hpp"
#include "train/train.hpp"

using nlohmann::json;

struct avalign_matrix {
  avalign::Tensor tensor;
};
struct avalign_dataset {
  avalign::LoadedDataset data;
};
struct avalign_train_config {
  avalign::TrainConfig config;
};
struct avalign_model {
  avalign::ToyModel model;
};
struct avalign_training {
  avalign::TrainResult result;
};

namespace {

thread_local std::string g_last_error;

avalign_status set_error(avalign_status status, const std::string& message) {
  g_last_error = message;
  return status;
}

// Runs body and maps every exception onto a status code.
template <typename F>
avalign_status guarded(F&& body) {
  try {
    body();
    return AVALIGN_OK;
  } catch (const avalign::Error& e) {
    return set_error(static_cast<avalign_status>(e.code()), e.what());
  } catch (const json::exception& e) {
    return set_error(AVALIGN_ERR_PARSE, e.what());
  } catch (const std::bad_alloc&) {
    return set_error(AVALIGN_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return set_error(AVALIGN_ERR_INTERNAL, e.what());
  } catch (...) {
    return set_error(AVALIGN_ERR_INTERNAL, "unknown exception");
  }
}

void require(const void* p, const char* what) {
  if (p == nullptr) avalign::fail(avalign::ErrorCode::kInvalidArgument, std::string(what) + " must not be NULL");
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.data(), s.size() + 1);
  return out;
}

std::vector<double> weights_or_uniform(const double* w, std::size_t n) {
  if (w == nullptr) return avalign::uniform_weights(n);
  return std::vector<double>(w, w + n);
}

avalign::BoundingBox to_box(const avalign_box& b) { return {b.x_left, b.y_top, b.x_right, b.y_bottom}; }
avalign_box from_box(const avalign::BoundingBox& b) { return {b.x_left, b.y_top, b.x_right, b.y_bottom}; }

avalign_status parse_status_code(avalign::ParseStatus s) {
  switch (s) {
    case avalign::ParseStatus::kOk: return AVALIGN_OK;
    case avalign::ParseStatus::kNoMatch: return AVALIGN_ERR_NO_MATCH;
    case avalign::ParseStatus::kMalformed: return AVALIGN_ERR_MALFORMED;
    case avalign::ParseStatus::kOutOfRange: return AVALIGN_ERR_OUT_OF_RANGE;
  }
  return AVALIGN_ERR_INTERNAL;
}

template <typename T>
void raise_parse_failure(const avalign::ParseResult<T>& r) {
  if (r.ok()) return;
  avalign::fail(static_cast<avalign::ErrorCode>(parse_status_code(r.status)), r.detail);
}

avalign::SinkhornConfig to_sinkhorn(const avalign_sinkhorn_config* c) {
  avalign::SinkhornConfig s;
  if (c == nullptr) return s;
  s.beta = c->beta;
  s.outer_steps = c->outer_steps;
  s.inner_steps = c->inner_steps;
  s.marginal_tolerance = c->marginal_tolerance;
  s.max_total_iterations = c->max_total_iterations;
  switch (c->log_domain) {
    case AVALIGN_LOG_DOMAIN_AUTO: s.log_domain = avalign::SinkhornConfig::LogDomain::kAuto; break;
    case AVALIGN_LOG_DOMAIN_ALWAYS: s.log_domain = avalign::SinkhornConfig::LogDomain::kAlways; break;
    case AVALIGN_LOG_DOMAIN_NEVER: s.log_domain = avalign::SinkhornConfig::LogDomain::kNever; break;
    default: avalign::fail(avalign::ErrorCode::kInvalidArgument, "unknown log_domain mode");
  }
  return s;
}

json losses_json(const avalign::LossBreakdown& b) {
  return json{{"l_ce", b.l_ce}, {"l_ot", b.l_ot}, {"l_ac", b.l_ac}, {"total", b.total}};
}

json epoch_json(const avalign::EpochLog& e) {
  return json{{"epoch", e.epoch}, {"train", losses_json(e.train)}, {"val", losses_json(e.val)}, {"lr_end", e.lr_end}};
}

json held_out_json(const avalign::HeldOutMetrics& m) {
  return json{{"ciou@0.5", m.ciou},
              {"auc", m.auc},
              {"segment_f1@0.5", m.segment_f1},
              {"verdict_f1", m.verdict_f1},
              {"verdict_accuracy", m.verdict_accuracy},
              {"box_parse_failures", m.box_parse_failures}};
}

json run_json(const avalign::AblationRun& r) {
  return json{{"combo", r.combo},
              {"seed", r.seed},
              {"lambda_ot", r.lambda_ot},
              {"lambda_ac", r.lambda_ac},
              {"metrics", held_out_json(r.metrics)}};
}

json metric_report_json(const avalign::MetricReport& r) {
  return json{{"task", std::string(avalign::sample_kind_name(r.kind))},
              {"samples", r.samples},
              {"parse_failures", r.parse_failures},
              {"failure_modes", r.failure_modes},
              {"metrics", r.metrics}};
}

json tensor_json(const avalign::Tensor& t) { return json{{"shape", t.shape()}, {"values", t.data()}}; }

std::vector<avalign::LabeledItem> read_labeled_jsonl(const std::string& path) {
  std::istringstream in(avalign::read_text_file(path));
  std::vector<avalign::LabeledItem> items;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("id") || !j.contains("label") || !j["label"].is_string()) {
      avalign::fail(avalign::ErrorCode::kParse,
                    path + " line " + std::to_string(lineno) + ": expected {\"id\": ..., \"label\": string}");
    }
    std::string id = j["id"].is_string() ? j["id"].get<std::string>() : j["id"].dump();
    items.push_back({std::move(id), j["label"].get<std::string>()});
  }
  return items;
}

}  // namespace

extern "C" {

const char* avalign_version(void) { return AVALIGN_VERSION_STRING; }

const char* avalign_status_name(avalign_status status) {
  // error_code_name returns views of string literals.
  return avalign::error_code_name(static_cast<avalign::ErrorCode>(status)).data();
}

const char* avalign_last_error(void) { return g_last_error.c_str(); }

void avalign_string_free(char* s) { std::free(s); }

// ---------------------------------------------------------------------------

avalign_status avalign_matrix_new(size_t rows, size_t cols, const double* values, avalign_matrix** out) {
  return guarded([&] {
    require(out, "out");
    if (rows == 0 || cols == 0) avalign::fail(avalign::ErrorCode::kInvalidArgument, "matrix dimensions must be positive");
    require(values, "values");
    *out = new avalign_matrix{avalign::Tensor({rows, cols}, std::vector<double>(values, values + rows * cols))};
  });
}

avalign_status avalign_matrix_parse_csv(const char* text, avalign_matrix** out) {
  return guarded([&] {
    require(text, "text");
    require(out, "out");
    std::istringstream in{std::string(text)};
    *out = new avalign_matrix{avalign::read_matrix_csv(in)};
  });
}

avalign_status avalign_matrix_read_csv(const char* path, avalign_matrix** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = new avalign_matrix{avalign::read_matrix_csv_file(path)};
  });
}

avalign_status avalign_matrix_to_csv(const avalign_matrix* m, char** out) {
  return guarded([&] {
    require(m, "matrix");
    require(out, "out");
    *out = dup_string(avalign::matrix_to_csv(m->tensor));
  });
}

size_t avalign_matrix_rows(const avalign_matrix* m) { return m ? m->tensor.rows() : 0; }
size_t avalign_matrix_cols(const avalign_matrix* m) { return m ? m->tensor.cols() : 0; }
const double* avalign_matrix_data(const avalign_matrix* m) { return m ? m->tensor.data().data() : nullptr; }
void avalign_matrix_free(avalign_matrix* m) { delete m; }

// ---------------------------------------------------------------------------

void avalign_sinkhorn_config_init(avalign_sinkhorn_config* cfg) {
  if (cfg == nullptr) return;
  avalign::SinkhornConfig d;
  cfg->beta = d.beta;
  cfg->outer_steps = d.outer_steps;
  cfg->inner_steps = d.inner_steps;
  cfg->marginal_tolerance = d.marginal_tolerance;
  cfg->max_total_iterations = d.max_total_iterations;
  cfg->log_domain = AVALIGN_LOG_DOMAIN_AUTO;
}

avalign_status avalign_cost_from_embeddings(const avalign_matrix* z_image, const avalign_matrix* z_audio,
                                            avalign_matrix** cost) {
  return guarded([&] {
    require(z_image, "z_image");
    require(z_audio, "z_audio");
    require(cost, "cost");
    *cost = new avalign_matrix{avalign::build_cost(z_image->tensor, z_audio->tensor).entries()};
  });
}

avalign_status avalign_sinkhorn(const avalign_matrix* cost, const double* u, const double* v,
                                const avalign_sinkhorn_config* cfg, avalign_matrix** plan, avalign_ot_stats* stats) {
  return guarded([&] {
    require(cost, "cost");
    require(plan, "plan");
    avalign::CostMatrix c(cost->tensor);
    auto uw = weights_or_uniform(u, c.rows());
    auto vw = weights_or_uniform(v, c.cols());
    avalign::SinkhornResult r = avalign::sinkhorn_plan(c, uw, vw, to_sinkhorn(cfg));
    if (stats != nullptr) {
      *stats = avalign_ot_stats{};
      stats->distance = r.distance;
      stats->marginal_violation = r.marginal_violation;
      stats->outer_steps_run = r.outer_steps_run;
      stats->inner_iterations = r.inner_iterations;
      stats->log_domain = r.log_domain ? 1 : 0;
      stats->newton_finish = r.newton_finish ? 1 : 0;
      stats->nonzeros = avalign::count_nonzeros(r.plan.entries);
    }
    *plan = new avalign_matrix{std::move(r.plan.entries)};
  });
}

avalign_status avalign_exact_ot(const avalign_matrix* cost, const double* u, const double* v, avalign_matrix** plan,
                                avalign_ot_stats* stats) {
  return guarded([&] {
    require(cost, "cost");
    require(plan, "plan");
    avalign::CostMatrix c(cost->tensor);
    auto uw = weights_or_uniform(u, c.rows());
    auto vw = weights_or_uniform(v, c.cols());
    avalign::ExactOtResult r = avalign::exact_ot(c, uw, vw);
    if (stats != nullptr) {
      *stats = avalign_ot_stats{};
      stats->distance = r.distance;
      stats->marginal_violation = avalign::marginal_violation(r.plan.entries, uw, vw);
      stats->bases_examined = r.bases_examined;
      stats->nonzeros = avalign::count_nonzeros(r.plan.entries);
    }
    *plan = new avalign_matrix{std::move(r.plan.entries)};
  });
}

// ---------------------------------------------------------------------------

avalign_status avalign_parse_box(const char* text, char** label, avalign_box* box) {
  return guarded([&] {
    require(text, "text");
    require(box, "box");
    auto r = avalign::parse_box(text);
    raise_parse_failure(r);
    if (label != nullptr) *label = dup_string(r.value->label);
    *box = from_box(r.value->box);
  });
}

avalign_status avalign_serialize_box(const char* label, const avalign_box* box, int precision, char** out) {
  return guarded([&] {
    require(label, "label");
    require(box, "box");
    require(out, "out");
    *out = dup_string(avalign::serialize_box(avalign::GroundedObject{label, to_box(*box)}, precision));
  });
}

avalign_status avalign_parse_time(const char* text, avalign_segment* segment) {
  return guarded([&] {
    require(text, "text");
    require(segment, "segment");
    auto r = avalign::parse_time(text);
    raise_parse_failure(r);
    *segment = avalign_segment{r.value->t_start, r.value->t_end};
  });
}

avalign_status avalign_serialize_time(const avalign_segment* segment, int precision, char** out) {
  return guarded([&] {
    require(segment, "segment");
    require(out, "out");
    *out = dup_string(avalign::serialize_time({segment->t_start, segment->t_end}, precision));
  });
}

avalign_status avalign_parse_verdict(const char* text, int* verdict) {
  return guarded([&] {
    require(text, "text");
    require(verdict, "verdict");
    auto r = avalign::parse_verdict(text);
    raise_parse_failure(r);
    *verdict = *r.value ? 1 : 0;
  });
}

avalign_status avalign_normalize_box(int64_t x_left, int64_t y_top, int64_t x_right, int64_t y_bottom, int64_t width,
                                     int64_t height, avalign_box* out) {
  return guarded([&] {
    require(out, "out");
    *out = from_box(avalign::normalize_box(x_left, y_top, x_right, y_bottom, width, height));
  });
}

avalign_status avalign_render_instruction(const char* template_text, const char* bindings_json, char** out) {
  return guarded([&] {
    require(template_text, "template_text");
    require(bindings_json, "bindings_json");
    require(out, "out");
    json j = json::parse(bindings_json);
    if (!j.is_object()) avalign::fail(avalign::ErrorCode::kParse, "bindings must be a JSON object");
    avalign::Bindings b;
    for (const auto& [key, value] : j.items()) {
      if (!value.is_string()) avalign::fail(avalign::ErrorCode::kParse, "binding '" + key + "' must be a string");
      b[key] = value.get<std::string>();
    }
    *out = dup_string(avalign::render_instruction(avalign::InstructionTemplate(template_text), b));
  });
}

avalign_status avalign_builtin_templates(char** json_out) {
  return guarded([&] {
    require(json_out, "json_out");
    json j = json::object();
    for (auto f : {avalign::TaskFamily::kArig, avalign::TaskFamily::kIgatl, avalign::TaskFamily::kAvfact}) {
      json list = json::array();
      for (const auto& t : avalign::builtin_templates(f)) list.push_back(t.text());
      j[std::string(avalign::task_family_name(f))] = list;
    }
    *json_out = dup_string(j.dump(2));
  });
}

avalign_status avalign_seg2bbox_file(const char* path, avalign_box* box, size_t pixel_box[4]) {
  return guarded([&] {
    require(path, "path");
    require(box, "box");
    avalign::BinaryMask mask = avalign::read_mask_file(path);
    avalign::PixelBox p = avalign::seg_mask_pixel_box(mask);
    *box = from_box(avalign::seg_mask_to_bbox(mask));
    if (pixel_box != nullptr) {
      pixel_box[0] = p.row_min;
      pixel_box[1] = p.row_max;
      pixel_box[2] = p.col_min;
      pixel_box[3] = p.col_max;
    }
  });
}

// ---------------------------------------------------------------------------

void avalign_avace_config_init(avalign_avace_config* cfg) {
  if (cfg == nullptr) return;
  avalign::AvaceConfig d;
  *cfg = avalign_avace_config{d.lambda1, d.lambda2, d.eps1, d.eps2};
}

avalign_status avalign_rasterize_mask(const avalign_box* box, size_t rows, size_t cols, avalign_matrix** mask,
                                      int* degenerate) {
  return guarded([&] {
    require(box, "box");
    require(mask, "mask");
    if (rows == 0 || cols == 0) avalign::fail(avalign::ErrorCode::kInvalidArgument, "grid must be non-empty");
    avalign::BoundingBox b = to_box(*box);
    avalign::make_box(b.x_left, b.y_top, b.x_right, b.y_bottom);
    avalign::BoxMask m = avalign::rasterize_mask(b, {rows, cols});
    if (degenerate != nullptr) *degenerate = m.degenerate ? 1 : 0;
    *mask = new avalign_matrix{std::move(m.grid)};
  });
}

avalign_status avalign_attention_loss(const avalign_matrix* attention, const avalign_box* box,
                                      const avalign_avace_config* cfg, double* loss, avalign_matrix** grad) {
  return guarded([&] {
    require(attention, "attention");
    require(box, "box");
    require(loss, "loss");
    avalign::AvaceConfig c;
    if (cfg != nullptr) c = avalign::AvaceConfig{cfg->lambda1, cfg->lambda2, cfg->eps1, cfg->eps2};
    c.validate();
    const avalign::Tensor& a = attention->tensor;
    avalign::AttentionMap checked(a);  // rejects entries outside [0, 1]
    avalign::BoundingBox b = avalign::make_box(box->x_left, box->y_top, box->x_right, box->y_bottom);
    avalign::Tensor mask = avalign::rasterize_mask(b, {a.rows(), a.cols()}).grid;
    avalign::Tape tape;
    avalign::Var leaf = tape.leaf(a);
    avalign::Var l = avalign::attention_consistency_loss(leaf, mask, c);
    if (grad != nullptr) {
      tape.backward(l);
      *grad = new avalign_matrix{tape.grad(leaf)};
    }
    *loss = l.value().item();
  });
}

// ---------------------------------------------------------------------------

avalign_status avalign_eval_jsonl(const char* jsonl, const char* task, size_t jobs, char** report_json) {
  return guarded([&] {
    require(jsonl, "jsonl");
    require(report_json, "report_json");
    std::istringstream in{std::string(jsonl)};
    std::vector<avalign::EvalSample> samples = avalign::read_eval_jsonl(in);
    if (samples.empty()) avalign::fail(avalign::ErrorCode::kInvalidArgument, "no evaluation records");
    if (task != nullptr) {
      for (const auto& s : samples) {
        if (avalign::sample_kind_name(s.kind()) != task) {
          avalign::fail(avalign::ErrorCode::kInvalidArgument,
                        "record '" + s.id + "' has task '" + std::string(avalign::sample_kind_name(s.kind())) +
                            "', expected '" + task + "'");
        }
      }
    }
    *report_json = dup_string(metric_report_json(avalign::evaluate(samples, jobs)).dump(2));
  });
}

// ---------------------------------------------------------------------------

avalign_status avalign_pair_files(const char* lookup_csv_path, const char* images_jsonl_path,
                                  const char* audios_jsonl_path, char** pairs_jsonl) {
  return guarded([&] {
    require(lookup_csv_path, "lookup_csv_path");
    require(images_jsonl_path, "images_jsonl_path");
    require(audios_jsonl_path, "audios_jsonl_path");
    require(pairs_jsonl, "pairs_jsonl");
    avalign::ClassLookupTable table = avalign::load_lookup(lookup_csv_path);
    auto images = read_labeled_jsonl(images_jsonl_path);
    auto audios = read_labeled_jsonl(audios_jsonl_path);
    std::string out;
    for (const auto& p : avalign::match_pairs(images, audios, table)) {
      out += json{{"image_id", p.image_id}, {"audio_id", p.audio_id}, {"label", p.matched_label}, {"score", p.score}}
                 .dump();
      out += '\n';
    }
    *pairs_jsonl = dup_string(out);
  });
}

avalign_status avalign_dataset_generate(uint64_t seed, size_t n, double positive_fraction, const char* spec_json,
                                        avalign_dataset** out) {
  return guarded([&] {
    require(out, "out");
    if (n < 1) avalign::fail(avalign::ErrorCode::kInvalidArgument, "dataset size must be at least 1");
    if (!(positive_fraction >= 0.0 && positive_fraction <= 1.0)) {
      avalign::fail(avalign::ErrorCode::kInvalidArgument, "positive fraction must lie in [0, 1]");
    }
    avalign::LoadedDataset d;
    d.spec = spec_json ? avalign::scene_spec_from_json(spec_json) : avalign::SceneSpec{};
    d.seed = seed;
    d.scenes = avalign::generate_dataset(seed, n, positive_fraction, d.spec);
    *out = new avalign_dataset{std::move(d)};
  });
}

avalign_status avalign_dataset_read(const char* path, avalign_dataset** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    std::ifstream in(path);
    if (!in) avalign::fail(avalign::ErrorCode::kIo, std::string("cannot open ") + path);
    *out = new avalign_dataset{avalign::read_dataset(in)};
  });
}

avalign_status avalign_dataset_write(const avalign_dataset* ds, const char* path) {
  return guarded([&] {
    require(ds, "dataset");
    require(path, "path");
    std::ofstream out(path, std::ios::binary);
    if (!out) avalign::fail(avalign::ErrorCode::kIo, std::string("cannot write ") + path);
    avalign::write_dataset(out, ds->data.scenes, ds->data.spec, ds->data.seed);
    out.flush();
    if (!out) avalign::fail(avalign::ErrorCode::kIo, std::string("write failed: ") + path);
  });
}

size_t avalign_dataset_size(const avalign_dataset* ds) { return ds ? ds->data.scenes.size() : 0; }

size_t avalign_dataset_positives(const avalign_dataset* ds) {
  if (ds == nullptr) return 0;
  size_t k = 0;
  for (const auto& s : ds->data.scenes) k += s.is_positive ? 1 : 0;
  return k;
}

avalign_status avalign_dataset_spec(const avalign_dataset* ds, char** spec_json) {
  return guarded([&] {
    require(ds, "dataset");
    require(spec_json, "spec_json");
    *spec_json = dup_string(avalign::scene_spec_to_json(ds->data.spec));
  });
}

void avalign_dataset_free(avalign_dataset* ds) { delete ds; }

// ---------------------------------------------------------------------------

avalign_status avalign_train_config_new(avalign_config_preset preset, avalign_train_config** out) {
  return guarded([&] {
    require(out, "out");
    switch (preset) {
      case AVALIGN_PRESET_TRAIN: *out = new avalign_train_config{avalign::TrainConfig{}}; break;
      case AVALIGN_PRESET_ABLATION: *out = new avalign_train_config{avalign::ablation_train_config()}; break;
      default: avalign::fail(avalign::ErrorCode::kInvalidArgument, "unknown config preset");
    }
  });
}

void avalign_train_config_free(avalign_train_config* cfg) { delete cfg; }

avalign_status avalign_train_config_set(avalign_train_config* cfg, const char* key, const char* value) {
  return guarded([&] {
    require(cfg, "config");
    require(key, "key");
    require(value, "value");
    avalign::set_train_option(cfg->config, key, value);
  });
}

avalign_status avalign_train_config_apply_text(avalign_train_config* cfg, const char* text) {
  return guarded([&] {
    require(cfg, "config");
    require(text, "text");
    avalign::TrainConfig copy = cfg->config;
    avalign::apply_config_text(copy, text);
    cfg->config = copy;
  });
}

avalign_status avalign_train_config_resolved(const avalign_train_config* cfg, char** json_out) {
  return guarded([&] {
    require(cfg, "config");
    require(json_out, "json_out");
    json j = json::object();
    for (const auto& [k, v] : avalign::resolved_config(cfg->config)) j[k] = v;
    *json_out = dup_string(j.dump());
  });
}

avalign_status avalign_train_config_keys(char** json_out) {
  return guarded([&] {
    require(json_out, "json_out");
    json j = json::array();
    for (const auto& [k, d] : avalign::train_config_keys()) j.push_back({{"key", k}, {"description", d}});
    *json_out = dup_string(j.dump());
  });
}

avalign_status avalign_lr_at(size_t step, size_t total_steps, double base_lr, double warmup_ratio, double* lr) {
  return guarded([&] {
    require(lr, "lr");
    *lr = avalign::lr_at(step, total_steps, base_lr, warmup_ratio);
  });
}

avalign_status avalign_train(const avalign_train_config* cfg, const avalign_dataset* ds, avalign_progress_fn on_epoch,
                             void* user, avalign_training** out) {
  return guarded([&] {
    require(cfg, "config");
    require(ds, "dataset");
    require(out, "out");
    const avalign::TrainConfig& c = cfg->config;
    auto dims = avalign::ModelDims::for_scenes(ds->data.spec, c.embed_dim, c.attn_dim, c.adapter_rank);
    std::function<void(const avalign::EpochLog&)> cb;
    if (on_epoch != nullptr) {
      cb = [&](const avalign::EpochLog& e) { on_epoch(epoch_json(e).dump().c_str(), user); };
    }
    *out = new avalign_training{avalign::train(c, ds->data.scenes, dims, cb)};
  });
}

void avalign_training_free(avalign_training* t) { delete t; }

avalign_status avalign_training_summary(const avalign_training* t, char** json_out) {
  return guarded([&] {
    require(t, "training");
    require(json_out, "json_out");
    const auto& r = t->result;
    json epochs = json::array();
    for (const auto& e : r.epochs) epochs.push_back(epoch_json(e));
    json j{{"total_steps", r.total_steps},
           {"best_epoch", r.best_epoch},
           {"epochs", epochs},
           {"final_step_loss", r.step_losses.empty() ? 0.0 : r.step_losses.back()}};
    *json_out = dup_string(j.dump(2));
  });
}

avalign_status avalign_training_loss_csv(const avalign_training* t, char** csv_out) {
  return guarded([&] {
    require(t, "training");
    require(csv_out, "csv_out");
    std::ostringstream os;
    os.precision(17);
    os << "step,total\n";
    for (std::size_t i = 0; i < t->result.step_losses.size(); ++i) os << i + 1 << ',' << t->result.step_losses[i] << '\n';
    *csv_out = dup_string(os.str());
  });
}

size_t avalign_training_checkpoints(const avalign_training* t) { return t ? t->result.checkpoints.size() : 0; }

avalign_status avalign_training_checkpoint(const avalign_training* t, size_t index, avalign_model** out) {
  return guarded([&] {
    require(t, "training");
    require(out, "out");
    if (index >= t->result.checkpoints.size()) {
      avalign::fail(avalign::ErrorCode::kOutOfRange, "checkpoint index " + std::to_string(index) + " out of range");
    }
    *out = new avalign_model{t->result.checkpoints[index]};
  });
}

avalign_status avalign_training_best(const avalign_training* t, avalign_model** out) {
  return guarded([&] {
    require(t, "training");
    require(out, "out");
    *out = new avalign_model{t->result.best};
  });
}

avalign_status avalign_model_to_json(const avalign_model* m, char** json_out) {
  return guarded([&] {
    require(m, "model");
    require(json_out, "json_out");
    *json_out = dup_string(avalign::model_to_json(m->model));
  });
}

avalign_status avalign_model_from_json(const char* text, avalign_model** out) {
  return guarded([&] {
    require(text, "json");
    require(out, "out");
    *out = new avalign_model{avalign::model_from_json(text)};
  });
}

avalign_status avalign_model_evaluate(const avalign_model* m, const avalign_dataset* ds, char** metrics_json) {
  return guarded([&] {
    require(m, "model");
    require(ds, "dataset");
    require(metrics_json, "metrics_json");
    *metrics_json = dup_string(held_out_json(avalign::evaluate_model(m->model, ds->data.scenes)).dump(2));
  });
}

void avalign_model_free(avalign_model* m) { delete m; }

void avalign_ablation_options_init(avalign_ablation_options* opts) {
  if (opts == nullptr) return;
  avalign::AblationConfig d;
  *opts = avalign_ablation_options{};
  opts->train_scenes = d.train_scenes;
  opts->test_scenes = d.test_scenes;
  opts->positive_fraction = d.positive_fraction;
  opts->seeds = nullptr;
  opts->num_seeds = 0;
  opts->jobs = d.jobs;
  opts->spec_json = nullptr;
}

avalign_status avalign_ablate(const avalign_train_config* cfg, const avalign_ablation_options* opts,
                              avalign_progress_fn on_run, void* user, char** table_json, char** markdown) {
  return guarded([&] {
    require(cfg, "config");
    avalign::AblationConfig a;
    a.train = cfg->config;
    if (opts != nullptr) {
      a.train_scenes = opts->train_scenes;
      a.test_scenes = opts->test_scenes;
      a.positive_fraction = opts->positive_fraction;
      if (opts->seeds != nullptr) a.seeds.assign(opts->seeds, opts->seeds + opts->num_seeds);
      a.jobs = opts->jobs;
      if (opts->spec_json != nullptr) a.scenes = avalign::scene_spec_from_json(opts->spec_json);
    }
    if (a.train_scenes < 2 || a.test_scenes < 1) {
      avalign::fail(avalign::ErrorCode::kInvalidArgument, "ablation needs at least 2 train and 1 test scene");
    }
    std::function<void(const avalign::AblationRun&)> cb;
    if (on_run != nullptr) {
      cb = [&](const avalign::AblationRun& r) {
        json j = run_json(r);
        j["seconds"] = r.seconds;
        on_run(j.dump().c_str(), user);
      };
    }
    avalign::AblationTable t = avalign::run_ablation(a, cb);

    json runs = json::array();
    for (const auto& r : t.runs) runs.push_back(run_json(r));
    json summary = json::array();
    for (const auto& combo : t.combos()) {
      std::vector<double> ciou, f1;
      for (const auto* r : t.runs_for(combo)) {
        ciou.push_back(r->metrics.ciou);
        f1.push_back(r->metrics.segment_f1);
      }
      summary.push_back({{"combo", combo},
                         {"ciou@0.5_median", avalign::median(ciou)},
                         {"segment_f1@0.5_median", avalign::median(f1)}});
    }
    auto base = t.runs_for("ce"), full = t.runs_for("ce+ot+ac");
    std::size_t wins = 0;
    for (std::size_t i = 0; i < base.size() && i < full.size(); ++i) wins += full[i]->metrics.ciou > base[i]->metrics.ciou;
    json j{{"seeds", a.seeds},
           {"train_scenes", a.train_scenes},
           {"test_scenes", a.test_scenes},
           {"runs", runs},
           {"summary", summary},
           {"full_beats_ce_seeds", wins}};
    if (table_json != nullptr) *table_json = dup_string(j.dump(2));
    if (markdown != nullptr) *markdown = dup_string(avalign::ablation_markdown(t));
  });
}

// ---------------------------------------------------------------------------

avalign_status avalign_gradcheck_targets(char** json_out) {
  return guarded([&] {
    require(json_out, "json_out");
    json j = json::array();
    for (const auto& t : avalign::gradcheck_targets()) {
      j.push_back({{"name", t.name}, {"description", t.description}, {"tolerance", t.tolerance}});
    }
    *json_out = dup_string(j.dump());
  });
}

avalign_status avalign_gradcheck(const char* target, uint64_t seed, double h, int* passed, char** report_json) {
  return guarded([&] {
    require(target, "target");
    require(passed, "passed");
    avalign::GradcheckOutcome o = avalign::run_gradcheck(target, seed, h);
    if (report_json != nullptr) {
      json j{{"target", o.target.name},
             {"seed", o.seed},
             {"h", h},
             {"wrt", o.wrt},
             {"tolerance", o.target.tolerance},
             {"max_relative_error", o.report.max_relative_error},
             {"passed", o.passed()},
             {"analytic", tensor_json(o.report.analytic)},
             {"numeric", tensor_json(o.report.numeric)}};
      *report_json = dup_string(j.dump(2));
    }
    *passed = o.passed() ? 1 : 0;
  });
}

}  // extern "C"
