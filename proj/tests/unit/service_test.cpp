/* Copyright 2026 The Wildscan Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include "wildscan/service.hpp"

#include <gtest/gtest.h>

#include <filesystem>

#include "wildscan/checkpoint.hpp"
#include "wildscan/common.hpp"

namespace wildscan {
namespace {

namespace fs = std::filesystem;

const std::vector<std::string> kClasses{"elephant", "tiger", "pangolin", "non_wildlife"};

void add_records(std::vector<FeedbackRecord>& out, const std::string& asserted,
                 std::size_t correct, std::size_t incorrect, const std::string& predicted) {
  for (std::size_t i = 0; i < correct; ++i) {
    out.push_back({"r" + std::to_string(out.size()), Verdict::correct, asserted, asserted, ""});
  }
  for (std::size_t i = 0; i < incorrect; ++i) {
    out.push_back({"r" + std::to_string(out.size()), Verdict::incorrect, asserted, predicted, ""});
  }
}

// The 138 field-test outcomes: 38/39, 35/39, 38/39 and 15/21.
std::vector<FeedbackRecord> field_test_records() {
  std::vector<FeedbackRecord> r;
  add_records(r, "elephant", 38, 1, "pangolin");
  add_records(r, "tiger", 35, 4, "elephant");
  add_records(r, "pangolin", 38, 1, "elephant");
  add_records(r, "non_wildlife", 15, 6, "elephant");
  return r;
}

TEST(StatsTest, FieldTestAccuracies) {
  const auto records = field_test_records();
  const StatsReport s = compute_stats(records, kClasses);
  EXPECT_EQ(s.overall.correct, 126u);
  EXPECT_EQ(s.overall.total, 138u);
  EXPECT_EQ(percent_half_up(38, 39), "97.44");
  EXPECT_EQ(percent_half_up(35, 39), "89.74");
  EXPECT_EQ(percent_half_up(15, 21), "71.43");
  EXPECT_EQ(percent_half_up(126, 138), "91.30");
  const std::string table = format_stats_table(s);
  for (const char* line : {"elephant      38/39  97.44%", "tiger         35/39  89.74%",
                           "pangolin      38/39  97.44%", "non_wildlife  15/21  71.43%",
                           "overall       126/138  91.30%"}) {
    EXPECT_NE(table.find(line), std::string::npos) << line << "\n" << table;
  }
}

TEST(StatsTest, MispredictionHistogram) {
  // Incorrect records only, tallied by the class the model predicted.
  std::vector<FeedbackRecord> r;
  add_records(r, "tiger", 0, 15, "elephant");
  add_records(r, "elephant", 0, 2, "tiger");
  add_records(r, "elephant", 0, 9, "pangolin");
  add_records(r, "tiger", 0, 3, "non_wildlife");
  const StatsReport s = compute_stats(r, kClasses);
  EXPECT_EQ(s.misprediction_histogram.at("elephant"), 15u);
  EXPECT_EQ(s.misprediction_histogram.at("tiger"), 2u);
  EXPECT_EQ(s.misprediction_histogram.at("pangolin"), 9u);
  EXPECT_EQ(s.misprediction_histogram.at("non_wildlife"), 3u);
  EXPECT_EQ(s.overall.total, 29u);
  EXPECT_EQ(s.overall.correct, 0u);
}

TEST(StatsTest, NoFeedbackListsEveryClass) {
  const StatsReport s = compute_stats({}, kClasses);
  EXPECT_EQ(s.overall.total, 0u);
  EXPECT_TRUE(s.per_class.empty());
  EXPECT_EQ(s.misprediction_histogram.size(), 4u);
  const auto j = stats_to_json(s);
  EXPECT_EQ(j["overall"]["total"], 0);
  EXPECT_NE(format_stats_table(s).find("overall       -"), std::string::npos);
}

TEST(ServiceHelpersTest, TopOneClass) {
  EXPECT_EQ(top1_class({}, kClasses), "non_wildlife");
  const std::vector<Detection> d{{{0, 0, 1, 1}, 0, 0.6}, {{0, 0, 1, 1}, 2, 0.9}};
  EXPECT_EQ(top1_class(d, kClasses), "pangolin");
}

TEST(ServiceHelpersTest, FeedbackJsonRoundTrip) {
  const FeedbackRecord r{"abc", Verdict::incorrect, "tiger", "elephant", "2026-01-02T03:04:05Z"};
  const FeedbackRecord back = feedback_from_json(nlohmann::json::parse(feedback_to_json(r).dump()));
  EXPECT_EQ(back.request_id, "abc");
  EXPECT_EQ(back.verdict, Verdict::incorrect);
  EXPECT_EQ(back.asserted_class, "tiger");
  EXPECT_EQ(back.predicted_class, "elephant");
  EXPECT_EQ(back.timestamp, r.timestamp);
  EXPECT_THROW(parse_verdict("maybe"), ValidationError);
}

DetectorConfig small_config() {
  DetectorConfig c;
  c.backbone_channels = {4, 6};
  c.feature_stride = 4;
  c.rpn_channels = 6;
  c.head_hidden = 8;
  c.anchor_scales = {8.0, 16.0};
  c.score_threshold = 0.05;
  return c;
}

std::vector<std::uint8_t> sample_png() {
  Image im(40, 30, 60);
  for (int y = 5; y < 20; ++y) {
    for (int x = 8; x < 30; ++x) im.at(x, y, 1) = 220;
  }
  return encode_png(im);
}

TEST(ServiceTest, PredictRequiresModel) {
  InferenceService svc({});
  EXPECT_FALSE(svc.model_version().has_value());
  EXPECT_THROW(svc.predict(sample_png()), UnavailableError);
}

TEST(ServiceTest, RejectsBadPayloads) {
  ServiceConfig config;
  config.max_payload_bytes = 64;
  InferenceService svc(config);
  svc.install_model(Detector(small_config(), 1), "v1");
  EXPECT_THROW(svc.predict(sample_png()), ValidationError);
  const std::vector<std::uint8_t> junk{0x89, 'P', 'N', 'G', 0, 0, 0};
  EXPECT_THROW(svc.predict(junk), DecodeError);
}

TEST(ServiceTest, PredictFeedbackStatsFlow) {
  InferenceService svc({});
  const Detector model(small_config(), 1);
  svc.install_model(model, "v1");
  const PredictionResponse p = svc.predict(sample_png());
  EXPECT_EQ(p.model_version, "v1");
  EXPECT_FALSE(p.request_id.empty());
  EXPECT_EQ(p.detections, model.detect(decode_image(sample_png())));
  const auto stored = svc.prediction(p.request_id);
  ASSERT_TRUE(stored.has_value());

  const FeedbackRecord f = svc.submit_feedback(p.request_id, Verdict::incorrect, "tiger");
  EXPECT_EQ(f.predicted_class, stored->predicted_class);
  EXPECT_EQ(f.timestamp.size(), 24u);  // YYYY-MM-DDTHH:MM:SS.mmmZ
  EXPECT_THROW(svc.submit_feedback(p.request_id, Verdict::correct, "tiger"), ConflictError);
  EXPECT_THROW(svc.submit_feedback("missing", Verdict::correct, "tiger"), NotFoundError);
  const PredictionResponse q = svc.predict(sample_png());
  EXPECT_NE(q.request_id, p.request_id);
  EXPECT_THROW(svc.submit_feedback(q.request_id, Verdict::correct, "lion"), ValidationError);

  const StatsReport s = svc.stats();
  EXPECT_EQ(s.overall.total, 1u);
  EXPECT_EQ(s.per_class.at("tiger").correct, 0u);
  EXPECT_EQ(s.misprediction_histogram.at(stored->predicted_class), 1u);
}

TEST(ServiceTest, LargeInputIsDownscaledAndBoxesMappedBack) {
  ServiceConfig config;
  config.max_input_side = 32;
  InferenceService svc(config);
  svc.install_model(Detector(small_config(), 2), "v1");
  Image big(96, 64, 30);
  for (int y = 10; y < 50; ++y) {
    for (int x = 20; x < 70; ++x) big.at(x, y, 0) = 240;
  }
  const auto p = svc.predict(encode_png(big));
  for (const auto& d : p.detections) {
    EXPECT_LE(d.box.x_max, 96.0);
    EXPECT_LE(d.box.y_max, 64.0);
  }
}

TEST(ServiceTest, FailedLoadKeepsServingPreviousModel) {
  const fs::path dir = fs::temp_directory_path() / "wildscan_service_load";
  fs::remove_all(dir);
  fs::create_directories(dir);
  InferenceService svc({});
  const CheckpointInfo good = save_checkpoint(Detector(small_config(), 3), dir / "good.ckpt");
  EXPECT_EQ(svc.load_model(dir / "good.ckpt"), good.model_version);

  DetectorConfig wrong = small_config();
  wrong.num_classes = 3;
  wrong.class_names = {"elephant", "tiger"};
  save_checkpoint(Detector(wrong, 3), dir / "wrong.ckpt");
  EXPECT_THROW(svc.load_model(dir / "wrong.ckpt"), ValidationError);
  EXPECT_THROW(svc.load_model(dir / "absent.ckpt"), Error);
  EXPECT_EQ(svc.model_version(), good.model_version);
  EXPECT_EQ(svc.predict(sample_png()).model_version, good.model_version);
}

TEST(ServiceTest, LogsReplayAfterRestart) {
  const fs::path dir = fs::temp_directory_path() / "wildscan_service_replay";
  fs::remove_all(dir);
  fs::create_directories(dir);
  ServiceConfig config;
  config.data_dir = dir;
  std::string id;
  {
    InferenceService svc(config);
    svc.install_model(Detector(small_config(), 4), "v1");
    id = svc.predict(sample_png()).request_id;
    svc.submit_feedback(id, Verdict::correct, "elephant");
  }
  InferenceService again(config);
  EXPECT_TRUE(again.prediction(id).has_value());
  ASSERT_EQ(again.feedback().size(), 1u);
  EXPECT_EQ(again.stats().overall.correct, 1u);
  EXPECT_THROW(again.submit_feedback(id, Verdict::correct, "elephant"), ConflictError);
}

TEST(ServiceTest, PredictionJsonUsesClassNames) {
  PredictionResponse r{"id1", {{{1, 2, 3, 4}, 1, 0.75}}, "v9", 2.5};
  const auto j = prediction_to_json(r, kClasses);
  EXPECT_EQ(j["request_id"], "id1");
  EXPECT_EQ(j["model_version"], "v9");
  EXPECT_EQ(j["detections"][0]["class"], "tiger");
  EXPECT_DOUBLE_EQ(j["detections"][0]["score"].get<double>(), 0.75);
}

}  // namespace
}  // namespace wildscan
