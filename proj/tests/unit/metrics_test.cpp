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

#include "wildscan/metrics.hpp"

#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "wildscan/common.hpp"

namespace wildscan {
namespace {

oracle::Rect rect(const Box& b) { return {b.x_min, b.y_min, b.x_max, b.y_max}; }

std::vector<oracle::ImageCase> to_oracle(const std::vector<ImageEval>& images) {
  std::vector<oracle::ImageCase> out;
  for (const auto& im : images) {
    oracle::ImageCase c;
    for (const auto& d : im.detections) c.dets.push_back({rect(d.box), d.class_id, d.score});
    for (const auto& g : im.ground_truths) c.gts.push_back({rect(g.box), g.class_id});
    out.push_back(std::move(c));
  }
  return out;
}

std::optional<double> ap_at(const std::vector<ImageEval>& images, int cls, double threshold) {
  std::vector<MatchResult> m;
  for (const auto& im : images) {
    m.push_back(match_detections(im.detections, im.ground_truths, cls, threshold));
  }
  return average_precision(m);
}

std::optional<double> recall_at(const std::vector<ImageEval>& images, int cls, double threshold) {
  std::vector<MatchResult> m;
  for (const auto& im : images) {
    m.push_back(match_detections(im.detections, im.ground_truths, cls, threshold));
  }
  return recall(m);
}

TEST(MetricsTest, PerfectDetectionGivesOne) {
  const std::vector<ImageEval> images{{"a", {{{0, 0, 10, 10}, 0, 0.9}}, {{{0, 0, 10, 10}, 0}}, 0}};
  EXPECT_DOUBLE_EQ(*ap_at(images, 0, 0.5), 1.0);
  EXPECT_DOUBLE_EQ(mean_average_recall_100(images, 1), 1.0);
}

TEST(MetricsTest, NoDetectionsGivesZero) {
  const std::vector<ImageEval> images{{"a", {}, {{{0, 0, 10, 10}, 0}}, 0}};
  EXPECT_DOUBLE_EQ(*ap_at(images, 0, 0.5), 0.0);
  EXPECT_DOUBLE_EQ(*recall_at(images, 0, 0.5), 0.0);
}

TEST(MetricsTest, ClassWithoutGroundTruthIsAbsent) {
  const std::vector<ImageEval> images{{"a", {{{0, 0, 10, 10}, 1, 0.9}}, {{{0, 0, 10, 10}, 0}}, 0}};
  EXPECT_FALSE(ap_at(images, 1, 0.5).has_value());
  const auto ap = per_class_ap50(images, 2);
  EXPECT_TRUE(ap[0].has_value());
  EXPECT_FALSE(ap[1].has_value());
  // Absent classes are left out of the mean rather than counted as zero.
  EXPECT_DOUBLE_EQ(mean_present(ap), 0.0);
}

// Three images, one class. Ranked outcomes: TP(0.9) FP(0.8) TP(0.7) FP(0.6)
// with 3 ground truths, so precision/recall points are (1, 1/3), (2/3, 2/3).
// Recall levels 0..33 see precision 1, 34..66 see 2/3, 67..100 see 0.
TEST(MetricsTest, HandComputedAveragePrecision) {
  const std::vector<ImageEval> images{
      {"a", {{{0, 0, 10, 10}, 0, 0.9}, {{50, 50, 60, 60}, 0, 0.8}}, {{{0, 0, 10, 10}, 0}}, 0},
      {"b", {{{0, 0, 10, 10}, 0, 0.7}}, {{{1, 0, 11, 10}, 0}, {{30, 30, 40, 40}, 0}}, 0},
      {"c", {{{0, 0, 10, 10}, 0, 0.6}}, {}, std::nullopt}};
  const double expected = (34 * 1.0 + 33 * (2.0 / 3.0)) / 101.0;
  EXPECT_NEAR(*ap_at(images, 0, 0.5), expected, 1e-12);
  EXPECT_NEAR(*recall_at(images, 0, 0.5), 2.0 / 3.0, 1e-12);
}

// A detection whose IoU with its ground truth is exactly 0.6 counts as
// matched for the thresholds 0.50, 0.55, 0.60 and misses the other seven.
TEST(MetricsTest, AverageRecallOverThresholds) {
  const std::vector<ImageEval> images{{"a", {{{0, 0, 10, 6}, 0, 0.5}}, {{{0, 0, 10, 10}, 0}}, 0}};
  EXPECT_NEAR(mean_average_recall_100(images, 1), 3.0 / 10.0, 1e-12);
}

TEST(MetricsTest, RecallCapsAtOneHundredDetections) {
  ImageEval im{"a", {}, {{{0, 0, 10, 10}, 0}}, 0};
  for (int i = 0; i < 100; ++i) im.detections.push_back({{200, 200, 210, 210}, 0, 0.9});
  im.detections.push_back({{0, 0, 10, 10}, 0, 0.1});
  const std::vector<ImageEval> images{im};
  EXPECT_DOUBLE_EQ(mean_average_recall_100(images, 1), 0.0);
  EXPECT_DOUBLE_EQ(*ap_at(images, 0, 0.5), 1.0 / 101.0);
}

TEST(MetricsTest, GreedyMatchingTakesEachGroundTruthOnce) {
  const std::vector<Detection> dets{{{0, 0, 10, 10}, 0, 0.9}, {{0, 0, 10, 10}, 0, 0.8}};
  const std::vector<GroundTruthBox> gts{{{0, 0, 10, 10}, 0}};
  const MatchResult m = match_detections(dets, gts, 0, 0.5);
  ASSERT_EQ(m.detections.size(), 2u);
  EXPECT_TRUE(m.detections[0].true_positive);
  EXPECT_FALSE(m.detections[1].true_positive);
  EXPECT_TRUE(m.ground_truth_matched[0]);
}

TEST(MetricsTest, ClassAccuracyUsesScoreThreshold) {
  const std::vector<ImageEval> images{
      {"a", {{{0, 0, 5, 5}, 0, 0.7}}, {}, 0},
      {"b", {{{0, 0, 5, 5}, 0, 0.49}}, {}, 0},
      {"c", {{{0, 0, 5, 5}, 0, 0.95}}, {}, 1},
      {"d", {{{0, 0, 5, 5}, 1, 0.5}}, {}, 1},
      {"e", {}, {}, std::nullopt}};
  const auto acc = class_detection_accuracy(images, 2, 0.5);
  ASSERT_TRUE(acc[0] && acc[1]);
  EXPECT_EQ(acc[0]->correct, 1u);
  EXPECT_EQ(acc[0]->total, 2u);
  EXPECT_EQ(acc[1]->correct, 1u);
  EXPECT_EQ(acc[1]->total, 2u);
}

std::vector<ImageEval> random_images(std::mt19937_64& rng, int max_images, int max_boxes,
                                     int classes) {
  std::uniform_int_distribution<int> n_img(1, max_images), n_box(0, max_boxes),
      cls(0, classes - 1);
  std::uniform_real_distribution<double> pos(0.0, 40.0), size(5.0, 25.0), jitter(-4.0, 4.0),
      score(0.0, 1.0);
  std::vector<ImageEval> out;
  const int images = n_img(rng);
  for (int i = 0; i < images; ++i) {
    ImageEval im;
    im.image_id = "im" + std::to_string(i);
    const int gts = n_box(rng);
    for (int g = 0; g < gts; ++g) {
      const double x = pos(rng), y = pos(rng);
      im.ground_truths.push_back({{x, y, x + size(rng), y + size(rng)}, cls(rng)});
    }
    const int dets = n_box(rng);
    for (int d = 0; d < dets; ++d) {
      Box b;
      if (!im.ground_truths.empty() && score(rng) < 0.6) {
        const Box& g = im.ground_truths[rng() % im.ground_truths.size()].box;
        b = {g.x_min + jitter(rng), g.y_min + jitter(rng), g.x_max + jitter(rng),
             g.y_max + jitter(rng)};
      } else {
        const double x = pos(rng), y = pos(rng);
        b = {x, y, x + size(rng), y + size(rng)};
      }
      // Quantized scores force ties across images.
      im.detections.push_back({b, cls(rng), std::round(score(rng) * 8.0) / 8.0});
    }
    out.push_back(std::move(im));
  }
  return out;
}

TEST(MetricsTest, TwelveImageCorpusMatchesOracle) {
  std::mt19937_64 rng(12);
  std::vector<ImageEval> images;
  while (images.size() < 12) {
    auto more = random_images(rng, 4, 6, 3);
    images.insert(images.end(), more.begin(), more.end());
  }
  images.resize(12);
  const auto cases = to_oracle(images);
  for (int c = 0; c < 3; ++c) {
    const auto ours = ap_at(images, c, 0.5);
    const auto ref = oracle::average_precision(cases, c, 0.5);
    ASSERT_EQ(ours.has_value(), ref.has_value());
    if (ours) {
      EXPECT_NEAR(*ours, *ref, 1e-12);
    }
  }
}

TEST(MetricsTest, RandomSetsMatchOracle) {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 100; ++trial) {
    const auto images = random_images(rng, 5, 6, 3);
    const auto cases = to_oracle(images);
    for (int c = 0; c < 3; ++c) {
      for (double t : kRecallThresholds) {
        const auto ap = ap_at(images, c, t);
        const auto ref_ap = oracle::average_precision(cases, c, t);
        ASSERT_EQ(ap.has_value(), ref_ap.has_value());
        if (ap) {
          EXPECT_NEAR(*ap, *ref_ap, 1e-9) << "trial " << trial;
        }
        const auto r = recall_at(images, c, t);
        const auto ref_r = oracle::recall_at(cases, c, t);
        if (r) {
          EXPECT_NEAR(*r, *ref_r, 1e-9) << "trial " << trial;
        }
      }
    }
  }
}

TEST(MetricsTest, ApDependsOnlyOnScoreRank) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    auto images = random_images(rng, 4, 6, 2);
    const auto before = per_class_ap50(images, 2);
    for (auto& im : images) {
      for (auto& d : im.detections) d.score = 0.1 + 0.5 * d.score * d.score;  // strictly monotone
    }
    const auto after = per_class_ap50(images, 2);
    for (int c = 0; c < 2; ++c) {
      ASSERT_EQ(before[c].has_value(), after[c].has_value());
      if (before[c]) {
        EXPECT_NEAR(*before[c], *after[c], 1e-12);
      }
    }
  }
}

TEST(MetricsTest, AddingTopTruePositiveNeverLowersAp) {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 100; ++trial) {
    auto images = random_images(rng, 4, 6, 1);
    const auto before = ap_at(images, 0, 0.5);
    if (!before) continue;
    // A fresh ground truth with an exact detection above every existing score.
    images[0].ground_truths.push_back({{100, 100, 120, 120}, 0});
    images[0].detections.push_back({{100, 100, 120, 120}, 0, 2.0});
    EXPECT_GE(*ap_at(images, 0, 0.5) + 1e-12, *before) << "trial " << trial;
  }
}

TEST(MetricsTest, RecallIsMatchedOverTotal) {
  std::mt19937_64 rng(15);
  for (int trial = 0; trial < 100; ++trial) {
    const auto images = random_images(rng, 4, 6, 2);
    for (int c = 0; c < 2; ++c) {
      std::size_t matched = 0, total = 0;
      for (const auto& im : images) {
        const auto m = match_detections(im.detections, im.ground_truths, c, 0.5);
        total += m.num_ground_truths;
        for (bool b : m.ground_truth_matched) matched += b;
      }
      const auto r = recall_at(images, c, 0.5);
      if (total == 0) {
        EXPECT_FALSE(r.has_value());
      } else {
        EXPECT_DOUBLE_EQ(*r, static_cast<double>(matched) / static_cast<double>(total));
      }
    }
  }
}

// Image-level class detection ignores geometry, so an image counted correct by
// a box-matched criterion is always counted correct by accuracy.
TEST(MetricsTest, AccuracyIsAtLeastBoxMatchedAccuracy) {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 100; ++trial) {
    auto images = random_images(rng, 5, 6, 3);
    std::size_t box_matched = 0;
    for (auto& im : images) {
      if (im.ground_truths.empty()) continue;
      im.image_class = im.ground_truths.front().class_id;
      const auto m = match_detections(im.detections, im.ground_truths, *im.image_class, 0.5);
      for (const auto& d : m.detections) {
        if (d.true_positive && d.score >= 0.5) {
          ++box_matched;
          break;
        }
      }
    }
    std::size_t correct = 0;
    for (const auto& a : class_detection_accuracy(images, 3, 0.5)) {
      if (a) correct += a->correct;
    }
    EXPECT_GE(correct, box_matched);
  }
}

EvalReport report_with_accuracy(double map, double mar, std::array<double, 4> acc) {
  EvalReport r;
  r.class_names = {"elephant", "tiger", "pangolin", "non_wildlife"};
  r.overall_map_50 = map;
  r.overall_mar_100 = mar;
  r.per_class.resize(4);
  for (std::size_t c = 0; c < 4; ++c) r.per_class[c].class_accuracy = acc[c];
  return r;
}

TEST(ReportTest, PerClassAccuracyRendersAsPercentages) {
  const std::vector<LabeledReport> reports{
      {"ce", report_with_accuracy(0.60, 0.56, {0.7115, 0.9026, 0.9357, 0.8210})}};
  const std::string table = format_comparison_table(reports);
  for (const char* cell : {"71.15%", "90.26%", "93.57%", "82.10%"}) {
    EXPECT_NE(table.find(cell), std::string::npos) << cell << "\n" << table;
  }
}

TEST(ReportTest, ComparisonTableListsBothLosses) {
  const std::vector<LabeledReport> reports{
      {"cross_entropy", report_with_accuracy(0.60, 0.56, {0.7115, 0.9026, 0.9357, 0.8210})},
      {"asymmetric_focal", report_with_accuracy(0.40, 0.59, {0.307, 0.0918, 0.0325, 0.517})}};
  const std::string table = format_comparison_table(reports);
  EXPECT_NE(table.find("cross_entropy        0.60     0.56"), std::string::npos) << table;
  EXPECT_NE(table.find("asymmetric_focal     0.40     0.59"), std::string::npos) << table;
  EXPECT_NE(table.find("3.25%"), std::string::npos);
  const std::string csv = format_comparison_csv(reports);
  EXPECT_NE(csv.find("cross_entropy"), std::string::npos);
}

TEST(ReportTest, MismatchedClassSetsAreRejected) {
  auto other = report_with_accuracy(0.1, 0.1, {0, 0, 0, 0});
  other.class_names[3] = "other";
  const std::vector<LabeledReport> reports{
      {"a", report_with_accuracy(0.1, 0.1, {0, 0, 0, 0})}, {"b", other}};
  EXPECT_THROW(format_comparison_table(reports), Error);
}

TEST(ReportTest, JsonRoundTrip) {
  std::mt19937_64 rng(2);
  auto images = random_images(rng, 4, 6, 4);
  for (auto& im : images) {
    if (!im.ground_truths.empty()) im.image_class = im.ground_truths[0].class_id;
  }
  const std::vector<std::string> names{"elephant", "tiger", "pangolin", "non_wildlife"};
  const EvalReport r = build_eval_report(images, names, 0.5);
  const EvalReport back = eval_report_from_json(eval_report_to_json(r));
  EXPECT_EQ(back.class_names, r.class_names);
  EXPECT_DOUBLE_EQ(back.overall_map_50, r.overall_map_50);
  EXPECT_DOUBLE_EQ(back.overall_mar_100, r.overall_mar_100);
  EXPECT_EQ(back.overall_accuracy, r.overall_accuracy);
  for (std::size_t c = 0; c < names.size(); ++c) {
    EXPECT_EQ(back.per_class[c].ap_50, r.per_class[c].ap_50);
    EXPECT_EQ(back.per_class[c].boxes, r.per_class[c].boxes);
  }
}

TEST(ReportTest, DetectionsJsonRoundTrip) {
  const std::vector<std::string> names{"elephant", "tiger"};
  const std::map<std::string, std::vector<Detection>> dets{
      {"a", {{{1.5, 2, 30, 40.25}, 1, 0.875}, {{0, 0, 4, 4}, 0, 0.125}}}, {"b", {}}};
  const auto back = detections_from_json(detections_to_json(dets, names), names);
  // One record per detection, so images without detections drop out.
  EXPECT_EQ(back.size(), 1u);
  EXPECT_EQ(back.at("a"), dets.at("a"));
}

}  // namespace
}  // namespace wildscan
