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

#include <avalign/avalign.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

namespace {

struct MatrixDeleter {
  void operator()(avalign_matrix* m) const { avalign_matrix_free(m); }
};
using Matrix = std::unique_ptr<avalign_matrix, MatrixDeleter>;

std::string take(char* s) {
  std::string out = s ? s : "";
  avalign_string_free(s);
  return out;
}

Matrix matrix(size_t rows, size_t cols, std::vector<double> v) {
  avalign_matrix* m = nullptr;
  EXPECT_EQ(avalign_matrix_new(rows, cols, v.data(), &m), AVALIGN_OK);
  return Matrix(m);
}

TEST(CApi, VersionAndStatusNames) {
  EXPECT_STRNE(avalign_version(), "");
  EXPECT_STREQ(avalign_status_name(AVALIGN_OK), "ok");
  EXPECT_STREQ(avalign_status_name(AVALIGN_ERR_OUT_OF_RANGE), "out_of_range");
}

TEST(CApi, NullArgumentsAndLastError) {
  EXPECT_EQ(avalign_matrix_new(2, 2, nullptr, nullptr), AVALIGN_ERR_INVALID_ARGUMENT);
  EXPECT_STRNE(avalign_last_error(), "");
  double nan = std::nan("");
  avalign_matrix* m = nullptr;
  EXPECT_EQ(avalign_matrix_new(1, 1, &nan, &m), AVALIGN_ERR_NON_FINITE);
  EXPECT_EQ(m, nullptr);
}

TEST(CApi, MatrixCsvRoundTrip) {
  avalign_matrix* raw = nullptr;
  ASSERT_EQ(avalign_matrix_parse_csv("1,2,3\n4,5,6\n", &raw), AVALIGN_OK);
  Matrix m(raw);
  EXPECT_EQ(avalign_matrix_rows(m.get()), 2u);
  EXPECT_EQ(avalign_matrix_cols(m.get()), 3u);
  EXPECT_EQ(avalign_matrix_data(m.get())[4], 5.0);
  char* csv = nullptr;
  ASSERT_EQ(avalign_matrix_to_csv(m.get(), &csv), AVALIGN_OK);
  EXPECT_EQ(take(csv), "1,2,3\n4,5,6\n");
  EXPECT_EQ(avalign_matrix_parse_csv("1,\"x\n", &raw), AVALIGN_ERR_PARSE);
}

TEST(CApi, SinkhornAndExact) {
  Matrix cost = matrix(2, 2, {0, 1, 1, 0});
  avalign_sinkhorn_config cfg;
  avalign_sinkhorn_config_init(&cfg);
  EXPECT_EQ(cfg.beta, 0.5);
  EXPECT_EQ(cfg.outer_steps, 20);
  cfg.beta = 0.01;
  avalign_matrix* plan = nullptr;
  avalign_ot_stats stats{};
  ASSERT_EQ(avalign_sinkhorn(cost.get(), nullptr, nullptr, &cfg, &plan, &stats), AVALIGN_OK);
  Matrix p(plan);
  EXPECT_NEAR(avalign_matrix_data(p.get())[0], 0.5, 1e-6);
  EXPECT_LT(stats.distance, 1e-2);
  EXPECT_LT(stats.marginal_violation, 1e-6);

  ASSERT_EQ(avalign_exact_ot(cost.get(), nullptr, nullptr, &plan, &stats), AVALIGN_OK);
  Matrix e(plan);
  EXPECT_EQ(stats.distance, 0.0);
  EXPECT_EQ(stats.nonzeros, 2u);

  Matrix big = matrix(6, 6, std::vector<double>(36, 0.0));
  EXPECT_EQ(avalign_exact_ot(big.get(), nullptr, nullptr, &plan, &stats), AVALIGN_ERR_INSTANCE_TOO_LARGE);
  double bad_u[2] = {0.7, 0.7};
  EXPECT_EQ(avalign_sinkhorn(cost.get(), bad_u, nullptr, &cfg, &plan, &stats), AVALIGN_ERR_INVALID_ARGUMENT);
}

TEST(CApi, CostFromEmbeddings) {
  Matrix a = matrix(1, 2, {1, 0});
  Matrix b = matrix(2, 2, {0, 1, -1, 0});
  avalign_matrix* c = nullptr;
  ASSERT_EQ(avalign_cost_from_embeddings(a.get(), b.get(), &c), AVALIGN_OK);
  Matrix cost(c);
  EXPECT_NEAR(avalign_matrix_data(cost.get())[0], 1.0, 1e-15);
  EXPECT_NEAR(avalign_matrix_data(cost.get())[1], 2.0, 1e-15);
  Matrix zero = matrix(1, 2, {0, 0});
  EXPECT_EQ(avalign_cost_from_embeddings(zero.get(), b.get(), &c), AVALIGN_ERR_ZERO_NORM);
}

TEST(CApi, Codecs) {
  char* label = nullptr;
  avalign_box box{};
  ASSERT_EQ(avalign_parse_box("Answer: [cat,0.25,0.25,0.75,0.75].", &label, &box), AVALIGN_OK);
  EXPECT_EQ(take(label), "cat");
  EXPECT_EQ(box.x_right, 0.75);
  EXPECT_EQ(avalign_parse_box("[dog,0.9,0.2,0.1,0.8]", nullptr, &box), AVALIGN_ERR_OUT_OF_RANGE);
  EXPECT_EQ(avalign_parse_box("[dog,0.1,0.2,0.8]", nullptr, &box), AVALIGN_ERR_MALFORMED);
  EXPECT_EQ(avalign_parse_box("nothing", nullptr, &box), AVALIGN_ERR_NO_MATCH);

  avalign_box dog{0.1, 0.2, 0.8, 0.9};
  char* s = nullptr;
  ASSERT_EQ(avalign_serialize_box("dog", &dog, 2, &s), AVALIGN_OK);
  EXPECT_EQ(take(s), "[dog,0.10,0.20,0.80,0.90]");
  avalign_segment seg{5, 15};
  ASSERT_EQ(avalign_serialize_time(&seg, 1, &s), AVALIGN_OK);
  EXPECT_EQ(take(s), "(5.0,15.0)");
  EXPECT_EQ(avalign_parse_time("(20,10)", &seg), AVALIGN_ERR_OUT_OF_RANGE);
  int verdict = -1;
  ASSERT_EQ(avalign_parse_verdict("false.", &verdict), AVALIGN_OK);
  EXPECT_EQ(verdict, 0);
  ASSERT_EQ(avalign_normalize_box(25, 50, 75, 100, 200, 200, &box), AVALIGN_OK);
  EXPECT_EQ(box.x_left, 0.125);
  EXPECT_EQ(box.y_bottom, 0.5);

  ASSERT_EQ(avalign_render_instruction("Find the <obj>.", "{\"obj\":\"violin\"}", &s), AVALIGN_OK);
  EXPECT_EQ(take(s), "Find the violin.");
  EXPECT_EQ(avalign_render_instruction("At <placeholder_time>?", "{}", &s), AVALIGN_ERR_INVALID_ARGUMENT);
  EXPECT_EQ(avalign_render_instruction("x", "{oops", &s), AVALIGN_ERR_PARSE);
  ASSERT_EQ(avalign_builtin_templates(&s), AVALIGN_OK);
  EXPECT_NE(take(s).find("\"avfact\""), std::string::npos);
}

TEST(CApi, Seg2bboxFile) {
  std::string path = ::testing::TempDir() + "mask.csv";
  std::ofstream(path) << "0,0,0\n0,1,0\n0,0,1\n";
  avalign_box box{};
  size_t pixels[4] = {};
  ASSERT_EQ(avalign_seg2bbox_file(path.c_str(), &box, pixels), AVALIGN_OK);
  EXPECT_EQ(pixels[0], 1u);
  EXPECT_EQ(pixels[1], 2u);
  EXPECT_EQ(pixels[2], 1u);
  EXPECT_EQ(pixels[3], 2u);
  EXPECT_DOUBLE_EQ(box.x_left, 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(box.x_right, 1.0);
  std::remove(path.c_str());
  EXPECT_EQ(avalign_seg2bbox_file("/nonexistent/mask.csv", &box, nullptr), AVALIGN_ERR_IO);
}

TEST(CApi, AttentionLoss) {
  avalign_avace_config cfg;
  avalign_avace_config_init(&cfg);
  EXPECT_EQ(cfg.eps1, 1e-9);
  Matrix a = matrix(2, 2, {1, 0, 0, 0});
  avalign_box top{0, 0, 1, 0.5};
  double loss = 0;
  avalign_matrix* grad = nullptr;
  ASSERT_EQ(avalign_attention_loss(a.get(), &top, &cfg, &loss, &grad), AVALIGN_OK);
  Matrix g(grad);
  EXPECT_NEAR(loss, 0.25, 1e-9);
  EXPECT_NEAR(avalign_matrix_data(g.get())[0], -0.25, 1e-9);
  EXPECT_NEAR(avalign_matrix_data(g.get())[3], 0.25, 1e-9);

  avalign_matrix* mask = nullptr;
  int degenerate = -1;
  ASSERT_EQ(avalign_rasterize_mask(&top, 4, 4, &mask, &degenerate), AVALIGN_OK);
  Matrix m(mask);
  EXPECT_EQ(degenerate, 0);
  EXPECT_EQ(avalign_matrix_data(m.get())[0], 1.0);
  EXPECT_EQ(avalign_matrix_data(m.get())[15], 0.0);

  Matrix out_of_range = matrix(1, 2, {0.5, 1.5});
  EXPECT_EQ(avalign_attention_loss(out_of_range.get(), &top, &cfg, &loss, nullptr), AVALIGN_ERR_OUT_OF_RANGE);
  avalign_box inverted{0.8, 0, 0.2, 1};
  EXPECT_EQ(avalign_attention_loss(a.get(), &inverted, &cfg, &loss, nullptr), AVALIGN_ERR_OUT_OF_RANGE);
}

TEST(CApi, EvalJsonl) {
  const char* jsonl =
      "{\"id\":\"a\",\"task\":\"segment\",\"pred\":\"(0.0,10.0)\",\"gt\":[0,10]}\n"
      "{\"id\":\"b\",\"task\":\"segment\",\"pred\":[0,10],\"gt\":[5,15]}\n";
  char* report = nullptr;
  ASSERT_EQ(avalign_eval_jsonl(jsonl, "segment", 2, &report), AVALIGN_OK);
  std::string r = take(report);
  EXPECT_NE(r.find("\"f1@0.5\""), std::string::npos) << r;
  EXPECT_EQ(avalign_eval_jsonl(jsonl, "box", 1, &report), AVALIGN_ERR_INVALID_ARGUMENT);
}

TEST(CApi, DatasetTrainAndModel) {
  avalign_dataset* ds = nullptr;
  const char* spec = "{\"grid_height\":3,\"grid_width\":3,\"feature_dim\":8,\"num_classes\":4,"
                     "\"audio_tokens\":8,\"min_segment\":2,\"max_segment\":4}";
  ASSERT_EQ(avalign_dataset_generate(4, 20, 0.5, spec, &ds), AVALIGN_OK);
  EXPECT_EQ(avalign_dataset_size(ds), 20u);
  EXPECT_EQ(avalign_dataset_positives(ds), 10u);

  std::string path = ::testing::TempDir() + "scenes.jsonl";
  ASSERT_EQ(avalign_dataset_write(ds, path.c_str()), AVALIGN_OK);
  avalign_dataset* back = nullptr;
  ASSERT_EQ(avalign_dataset_read(path.c_str(), &back), AVALIGN_OK);
  EXPECT_EQ(avalign_dataset_size(back), 20u);
  avalign_dataset_free(back);
  std::remove(path.c_str());

  avalign_train_config* cfg = nullptr;
  ASSERT_EQ(avalign_train_config_new(AVALIGN_PRESET_TRAIN, &cfg), AVALIGN_OK);
  EXPECT_EQ(avalign_train_config_set(cfg, "epochs", "2"), AVALIGN_OK);
  EXPECT_EQ(avalign_train_config_set(cfg, "embed_dim", "6"), AVALIGN_OK);
  EXPECT_EQ(avalign_train_config_set(cfg, "no_such_key", "1"), AVALIGN_ERR_UNKNOWN_KEY);
  EXPECT_EQ(avalign_train_config_apply_text(cfg, "epochs = 3\nbogus = 1\n"), AVALIGN_ERR_UNKNOWN_KEY);
  char* resolved = nullptr;
  ASSERT_EQ(avalign_train_config_resolved(cfg, &resolved), AVALIGN_OK);
  EXPECT_NE(take(resolved).find("\"epochs\":\"2\""), std::string::npos);

  int epochs_seen = 0;
  avalign_training* t = nullptr;
  ASSERT_EQ(avalign_train(cfg, ds, [](const char*, void* user) { ++*static_cast<int*>(user); }, &epochs_seen, &t),
            AVALIGN_OK);
  EXPECT_EQ(epochs_seen, 2);
  EXPECT_EQ(avalign_training_checkpoints(t), 2u);
  char* csv = nullptr;
  ASSERT_EQ(avalign_training_loss_csv(t, &csv), AVALIGN_OK);
  EXPECT_EQ(take(csv).rfind("step,", 0), 0u);

  avalign_model* best = nullptr;
  ASSERT_EQ(avalign_training_best(t, &best), AVALIGN_OK);
  char* json = nullptr;
  ASSERT_EQ(avalign_model_to_json(best, &json), AVALIGN_OK);
  std::string model_json = take(json);
  avalign_model* copy = nullptr;
  ASSERT_EQ(avalign_model_from_json(model_json.c_str(), &copy), AVALIGN_OK);
  ASSERT_EQ(avalign_model_to_json(copy, &json), AVALIGN_OK);
  EXPECT_EQ(take(json), model_json);
  char* metrics = nullptr;
  ASSERT_EQ(avalign_model_evaluate(copy, ds, &metrics), AVALIGN_OK);
  EXPECT_NE(take(metrics).find("ciou@0.5"), std::string::npos);
  avalign_model* nothing = nullptr;
  EXPECT_EQ(avalign_training_checkpoint(t, 5, &nothing), AVALIGN_ERR_OUT_OF_RANGE);

  avalign_model_free(copy);
  avalign_model_free(best);
  avalign_training_free(t);
  avalign_train_config_free(cfg);
  avalign_dataset_free(ds);
}

TEST(CApi, ScheduleAndGradcheck) {
  double lr = -1;
  ASSERT_EQ(avalign_lr_at(0, 100, 1e-3, 0.03, &lr), AVALIGN_OK);
  EXPECT_EQ(lr, 0.0);
  ASSERT_EQ(avalign_lr_at(3, 100, 1e-3, 0.03, &lr), AVALIGN_OK);
  EXPECT_EQ(lr, 1e-3);
  int passed = 0;
  char* report = nullptr;
  ASSERT_EQ(avalign_gradcheck("avace", 7, 1e-5, &passed, &report), AVALIGN_OK);
  EXPECT_EQ(passed, 1);
  EXPECT_NE(take(report).find("max_relative_error"), std::string::npos);
  EXPECT_EQ(avalign_gradcheck("nope", 0, 1e-5, &passed, &report), AVALIGN_ERR_INVALID_ARGUMENT);
}

}  // namespace
