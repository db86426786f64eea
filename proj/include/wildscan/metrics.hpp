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

#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "wildscan/dataset.hpp"
#include "wildscan/nms.hpp"

namespace wildscan {

// IoU ladder for mAR_100.
inline constexpr std::array<double, 10> kRecallThresholds = {0.50, 0.55, 0.60, 0.65, 0.70,
                                                             0.75, 0.80, 0.85, 0.90, 0.95};
inline constexpr std::size_t kMaxDetectionsPerImage = 100;

struct GroundTruthBox {
  Box box;
  int class_id = 0;  // evaluation class index
};

// Everything the evaluator needs about one image.
struct ImageEval {
  std::string image_id;
  std::vector<Detection> detections;
  std::vector<GroundTruthBox> ground_truths;
  // Image-level evaluation class, for class-detection accuracy.
  std::optional<int> image_class;
};

struct DetectionMatch {
  std::size_t detection = 0;  // index into the input detections
  double score = 0.0;
  std::optional<std::size_t> ground_truth;  // index into the input ground truths
  double iou = 0.0;  // with the matched ground truth, else best IoU of the class
  bool true_positive = false;
};

struct MatchResult {
  // Detections of the class in descending score order (input order on ties).
  std::vector<DetectionMatch> detections;
  // Aligned with the input ground truths; boxes of other classes stay false.
  std::vector<bool> ground_truth_matched;
  std::size_t num_ground_truths = 0;  // of the class
};

// Greedy: each detection in score order takes the unmatched same-class ground
// truth with the highest IoU >= threshold (lowest index on ties).
MatchResult match_detections(std::span<const Detection> detections,
                             std::span<const GroundTruthBox> ground_truths, int class_id,
                             double iou_threshold);

// 101-point interpolated AP over per-image match results of one class.
// nullopt when the class has no ground truth.
std::optional<double> average_precision(std::span<const MatchResult> per_image);

// Matched / total ground truths of the class; nullopt when there are none.
std::optional<double> recall(std::span<const MatchResult> per_image);

// Keeps the `limit` highest-scoring detections (stable on ties).
std::vector<Detection> top_detections(std::span<const Detection> detections, std::size_t limit);

// Per class: AP at IoU 0.5 over all detections.
std::vector<std::optional<double>> per_class_ap50(std::span<const ImageEval> images,
                                                  int num_classes);
// Per class: recall averaged over kRecallThresholds with at most 100
// detections per image (across classes, by descending score).
std::vector<std::optional<double>> per_class_ar100(std::span<const ImageEval> images,
                                                   int num_classes);
// Mean over classes with ground truth; 0 when no class has any.
double mean_present(std::span<const std::optional<double>> values);
double mean_average_recall_100(std::span<const ImageEval> images, int num_classes);

struct ClassAccuracy {
  std::size_t correct = 0;
  std::size_t total = 0;
  double accuracy() const { return total == 0 ? 0.0 : static_cast<double>(correct) / total; }
};

// An image of class c counts as correct iff it has a detection of class c
// with score >= score_threshold. Box geometry is ignored. Images without an
// image_class are skipped; classes with no images are nullopt.
std::vector<std::optional<ClassAccuracy>> class_detection_accuracy(
    std::span<const ImageEval> images, int num_classes, double score_threshold);

struct ClassMetrics {
  std::optional<double> ap_50;
  std::optional<double> ar_100;
  std::optional<double> class_accuracy;
  std::size_t images = 0;
  std::size_t boxes = 0;
};

struct EvalReport {
  std::vector<std::string> class_names;
  double overall_map_50 = 0.0;
  double overall_mar_100 = 0.0;
  // Correct images / images with a class, nullopt when there are none.
  std::optional<double> overall_accuracy;
  std::vector<ClassMetrics> per_class;
  std::size_t images = 0;
};

EvalReport build_eval_report(std::span<const ImageEval> images,
                             const std::vector<std::string>& class_names, double score_threshold);

// Joins detections (keyed by image_id) with the manifest's ground truth for
// the images of `split` (all images when nullopt). Categories are mapped to
// evaluation classes through the manifest taxonomy.
std::vector<ImageEval> eval_inputs(const DatasetManifest& manifest, std::optional<Split> split,
                                   const std::map<std::string, std::vector<Detection>>& detections,
                                   const std::vector<std::string>& class_names);

nlohmann::ordered_json eval_report_to_json(const EvalReport& report);
EvalReport eval_report_from_json(const nlohmann::json& doc);

using LabeledReport = std::pair<std::string, EvalReport>;

// Aligned plain-text table: an overall block (mAP_50, mAR_100, accuracy) and
// a per-class block in class order; absent values print as "-".
std::string format_comparison_table(std::span<const LabeledReport> reports);
// One row per (label, scope) with full-precision values.
std::string format_comparison_csv(std::span<const LabeledReport> reports);

// Detections file: [{"image_id", "class", "score", "box": {x_min, ...}}].
nlohmann::ordered_json detections_to_json(
    const std::map<std::string, std::vector<Detection>>& detections,
    const std::vector<std::string>& class_names);
std::map<std::string, std::vector<Detection>> detections_from_json(
    const nlohmann::json& doc, const std::vector<std::string>& class_names);

}  // namespace wildscan
