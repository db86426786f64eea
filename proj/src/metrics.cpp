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

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "wildscan/common.hpp"

namespace wildscan {
namespace {

using nlohmann::json;
using nlohmann::ordered_json;

std::vector<std::size_t> score_order(std::span<const Detection> detections) {
  std::vector<std::size_t> order(detections.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return detections[a].score > detections[b].score;
  });
  return order;
}

int class_index(const std::vector<std::string>& names, const std::string& name,
                const std::string& field) {
  const auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) {
    throw ValidationError(field, std::nullopt, "unknown class '" + name + "'");
  }
  return static_cast<int>(it - names.begin());
}

std::string cell(const std::optional<double>& value, bool percent) {
  if (!value) return "-";
  return percent ? fixed_half_up(*value * 100.0, 2) + "%" : fixed_half_up(*value, 2);
}

std::string csv_value(const std::optional<double>& value) {
  return value ? shortest_repr(*value) : "";
}

json optional_json(const std::optional<double>& value) {
  return value ? json(*value) : json(nullptr);
}

std::optional<double> optional_from(const json& value) {
  if (value.is_null()) return std::nullopt;
  return value.get<double>();
}

void check_same_classes(std::span<const LabeledReport> reports) {
  for (const auto& [label, report] : reports) {
    if (report.class_names != reports.front().second.class_names) {
      throw Error("report '" + label + "' has a different class set than '" +
                  reports.front().first + "'");
    }
    if (report.per_class.size() != report.class_names.size()) {
      throw Error("report '" + label + "' has inconsistent per-class entries");
    }
  }
}

std::string pad(const std::string& text, std::size_t width, bool right) {
  if (text.size() >= width) return text;
  const std::string fill(width - text.size(), ' ');
  return right ? fill + text : text + fill;
}

}  // namespace

MatchResult match_detections(std::span<const Detection> detections,
                             std::span<const GroundTruthBox> ground_truths, int class_id,
                             double iou_threshold) {
  MatchResult result;
  result.ground_truth_matched.assign(ground_truths.size(), false);
  for (const auto& gt : ground_truths) {
    if (gt.class_id == class_id) ++result.num_ground_truths;
  }
  for (std::size_t index : score_order(detections)) {
    const Detection& detection = detections[index];
    if (detection.class_id != class_id) continue;
    DetectionMatch match{index, detection.score, std::nullopt, 0.0, false};
    double best = -1.0;
    for (std::size_t g = 0; g < ground_truths.size(); ++g) {
      if (ground_truths[g].class_id != class_id) continue;
      const double overlap = iou(detection.box, ground_truths[g].box);
      match.iou = std::max(match.iou, overlap);
      if (result.ground_truth_matched[g] || overlap < iou_threshold) continue;
      if (overlap > best) {
        best = overlap;
        match.ground_truth = g;
      }
    }
    if (match.ground_truth) {
      result.ground_truth_matched[*match.ground_truth] = true;
      match.true_positive = true;
      match.iou = best;
    }
    result.detections.push_back(match);
  }
  return result;
}

std::optional<double> average_precision(std::span<const MatchResult> per_image) {
  std::size_t total = 0;
  std::vector<const DetectionMatch*> ranked;
  for (const auto& image : per_image) {
    total += image.num_ground_truths;
    for (const auto& match : image.detections) ranked.push_back(&match);
  }
  if (total == 0) return std::nullopt;
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const DetectionMatch* a, const DetectionMatch* b) { return a->score > b->score; });

  std::vector<double> precision;
  std::vector<double> recall_at;
  std::size_t tp = 0;
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    if (ranked[i]->true_positive) ++tp;
    precision.push_back(static_cast<double>(tp) / static_cast<double>(i + 1));
    recall_at.push_back(static_cast<double>(tp) / static_cast<double>(total));
  }
  // Precision envelope: best precision at this or any later rank.
  for (std::size_t i = precision.size(); i-- > 1;) {
    precision[i - 1] = std::max(precision[i - 1], precision[i]);
  }
  double sum = 0.0;
  std::size_t k = 0;
  for (int i = 0; i <= 100; ++i) {
    const double r = i / 100.0;
    while (k < recall_at.size() && recall_at[k] < r) ++k;
    if (k < recall_at.size()) sum += precision[k];
  }
  return sum / 101.0;
}

std::optional<double> recall(std::span<const MatchResult> per_image) {
  std::size_t total = 0;
  std::size_t matched = 0;
  for (const auto& image : per_image) {
    total += image.num_ground_truths;
    for (const auto& match : image.detections) matched += match.true_positive ? 1 : 0;
  }
  if (total == 0) return std::nullopt;
  return static_cast<double>(matched) / static_cast<double>(total);
}

std::vector<Detection> top_detections(std::span<const Detection> detections, std::size_t limit) {
  std::vector<Detection> out;
  for (std::size_t index : score_order(detections)) {
    if (out.size() == limit) break;
    out.push_back(detections[index]);
  }
  return out;
}

std::vector<std::optional<double>> per_class_ap50(std::span<const ImageEval> images,
                                                  int num_classes) {
  std::vector<std::optional<double>> out;
  for (int c = 0; c < num_classes; ++c) {
    std::vector<MatchResult> matches;
    for (const auto& image : images) {
      matches.push_back(match_detections(image.detections, image.ground_truths, c, 0.5));
    }
    out.push_back(average_precision(matches));
  }
  return out;
}

std::vector<std::optional<double>> per_class_ar100(std::span<const ImageEval> images,
                                                   int num_classes) {
  std::vector<std::vector<Detection>> capped;
  for (const auto& image : images) {
    capped.push_back(top_detections(image.detections, kMaxDetectionsPerImage));
  }
  std::vector<std::optional<double>> out;
  for (int c = 0; c < num_classes; ++c) {
    double sum = 0.0;
    bool present = false;
    for (double threshold : kRecallThresholds) {
      std::vector<MatchResult> matches;
      for (std::size_t i = 0; i < images.size(); ++i) {
        matches.push_back(match_detections(capped[i], images[i].ground_truths, c, threshold));
      }
      if (auto r = recall(matches)) {
        present = true;
        sum += *r;
      }
    }
    out.push_back(present ? std::optional<double>(sum / kRecallThresholds.size()) : std::nullopt);
  }
  return out;
}

double mean_present(std::span<const std::optional<double>> values) {
  double sum = 0.0;
  std::size_t count = 0;
  for (const auto& v : values) {
    if (v) {
      sum += *v;
      ++count;
    }
  }
  return count == 0 ? 0.0 : sum / static_cast<double>(count);
}

double mean_average_recall_100(std::span<const ImageEval> images, int num_classes) {
  return mean_present(per_class_ar100(images, num_classes));
}

std::vector<std::optional<ClassAccuracy>> class_detection_accuracy(
    std::span<const ImageEval> images, int num_classes, double score_threshold) {
  std::vector<std::optional<ClassAccuracy>> out(static_cast<std::size_t>(num_classes));
  for (const auto& image : images) {
    if (!image.image_class) continue;
    const int c = *image.image_class;
    if (c < 0 || c >= num_classes) throw Error("image class out of range: " + image.image_id);
    auto& slot = out[static_cast<std::size_t>(c)];
    if (!slot) slot = ClassAccuracy{};
    ++slot->total;
    const bool hit = std::any_of(image.detections.begin(), image.detections.end(),
                                 [&](const Detection& d) {
                                   return d.class_id == c && d.score >= score_threshold;
                                 });
    if (hit) ++slot->correct;
  }
  return out;
}

EvalReport build_eval_report(std::span<const ImageEval> images,
                             const std::vector<std::string>& class_names, double score_threshold) {
  const int k = static_cast<int>(class_names.size());
  for (const auto& image : images) {
    for (const auto& gt : image.ground_truths) {
      if (gt.class_id < 0 || gt.class_id >= k) {
        throw Error("ground truth class out of range on image " + image.image_id);
      }
    }
  }
  EvalReport report;
  report.class_names = class_names;
  report.images = images.size();
  report.per_class.resize(class_names.size());
  const auto ap = per_class_ap50(images, k);
  const auto ar = per_class_ar100(images, k);
  const auto accuracy = class_detection_accuracy(images, k, score_threshold);
  std::size_t correct = 0;
  std::size_t total = 0;
  for (std::size_t c = 0; c < class_names.size(); ++c) {
    auto& m = report.per_class[c];
    m.ap_50 = ap[c];
    m.ar_100 = ar[c];
    if (accuracy[c]) {
      m.class_accuracy = accuracy[c]->accuracy();
      m.images = accuracy[c]->total;
      correct += accuracy[c]->correct;
      total += accuracy[c]->total;
    }
  }
  for (const auto& image : images) {
    for (const auto& gt : image.ground_truths) ++report.per_class[static_cast<std::size_t>(gt.class_id)].boxes;
  }
  report.overall_map_50 = mean_present(ap);
  report.overall_mar_100 = mean_present(ar);
  if (total > 0) report.overall_accuracy = static_cast<double>(correct) / static_cast<double>(total);
  return report;
}

std::vector<ImageEval> eval_inputs(const DatasetManifest& manifest, std::optional<Split> split,
                                   const std::map<std::string, std::vector<Detection>>& detections,
                                   const std::vector<std::string>& class_names) {
  auto class_of = [&](const std::string& category, const std::string& where) {
    const auto eval_class = manifest.taxonomy.eval_class_of(category);
    if (!eval_class) throw ValidationError(where, std::nullopt, "unmapped category '" + category + "'");
    return class_index(class_names, *eval_class, where);
  };
  std::vector<ImageEval> out;
  for (const auto& record : manifest.images) {
    if (split) {
      const auto it = manifest.splits.find(record.image_id);
      if (it == manifest.splits.end() || it->second != *split) continue;
    }
    ImageEval image;
    image.image_id = record.image_id;
    image.image_class = class_of(record.category_label, "images." + record.image_id);
    for (const auto* annotation : manifest.annotations_for(record.image_id)) {
      image.ground_truths.push_back(
          {annotation->box, class_of(annotation->category, "annotations." + record.image_id)});
    }
    if (const auto it = detections.find(record.image_id); it != detections.end()) {
      image.detections = it->second;
    }
    out.push_back(std::move(image));
  }
  return out;
}

ordered_json eval_report_to_json(const EvalReport& report) {
  ordered_json j;
  j["class_names"] = report.class_names;
  j["images"] = report.images;
  j["overall_map_50"] = report.overall_map_50;
  j["overall_mar_100"] = report.overall_mar_100;
  j["overall_accuracy"] = optional_json(report.overall_accuracy);
  ordered_json per_class = ordered_json::object();
  for (std::size_t c = 0; c < report.class_names.size(); ++c) {
    const auto& m = report.per_class[c];
    ordered_json entry;
    entry["ap_50"] = optional_json(m.ap_50);
    entry["ar_100"] = optional_json(m.ar_100);
    entry["class_accuracy"] = optional_json(m.class_accuracy);
    entry["images"] = m.images;
    entry["boxes"] = m.boxes;
    per_class[report.class_names[c]] = entry;
  }
  j["per_class"] = per_class;
  return j;
}

EvalReport eval_report_from_json(const json& doc) {
  try {
    EvalReport report;
    report.class_names = doc.at("class_names").get<std::vector<std::string>>();
    report.images = doc.at("images").get<std::size_t>();
    report.overall_map_50 = doc.at("overall_map_50").get<double>();
    report.overall_mar_100 = doc.at("overall_mar_100").get<double>();
    report.overall_accuracy = optional_from(doc.at("overall_accuracy"));
    for (const auto& name : report.class_names) {
      const json& entry = doc.at("per_class").at(name);
      ClassMetrics m;
      m.ap_50 = optional_from(entry.at("ap_50"));
      m.ar_100 = optional_from(entry.at("ar_100"));
      m.class_accuracy = optional_from(entry.at("class_accuracy"));
      m.images = entry.at("images").get<std::size_t>();
      m.boxes = entry.at("boxes").get<std::size_t>();
      report.per_class.push_back(m);
    }
    return report;
  } catch (const json::exception& e) {
    throw ValidationError("eval_report", std::nullopt, e.what());
  }
}

std::string format_comparison_table(std::span<const LabeledReport> reports) {
  if (reports.empty()) return "";
  check_same_classes(reports);
  std::size_t label_width = 5;
  for (const auto& [label, report] : reports) label_width = std::max(label_width, label.size());
  std::size_t class_width = 5;
  for (const auto& name : reports.front().second.class_names) {
    class_width = std::max(class_width, name.size());
  }

  std::ostringstream out;
  out << pad("label", label_width, false) << "  " << pad("mAP_50", 7, true) << "  "
      << pad("mAR_100", 7, true) << "  " << pad("accuracy", 8, true) << "\n";
  for (const auto& [label, report] : reports) {
    out << pad(label, label_width, false) << "  "
        << pad(cell(report.overall_map_50, false), 7, true) << "  "
        << pad(cell(report.overall_mar_100, false), 7, true) << "  "
        << pad(cell(report.overall_accuracy, true), 8, true) << "\n";
  }
  out << "\n";
  out << pad("label", label_width, false) << "  " << pad("class", class_width, false) << "  "
      << pad("AP_50", 7, true) << "  " << pad("AR_100", 7, true) << "  "
      << pad("accuracy", 8, true) << "\n";
  for (const auto& [label, report] : reports) {
    for (std::size_t c = 0; c < report.class_names.size(); ++c) {
      const auto& m = report.per_class[c];
      out << pad(label, label_width, false) << "  " << pad(report.class_names[c], class_width, false)
          << "  " << pad(cell(m.ap_50, false), 7, true) << "  "
          << pad(cell(m.ar_100, false), 7, true) << "  "
          << pad(cell(m.class_accuracy, true), 8, true) << "\n";
    }
  }
  return out.str();
}

std::string format_comparison_csv(std::span<const LabeledReport> reports) {
  std::ostringstream out;
  out << "label,scope,map_50,mar_100,accuracy\n";
  if (reports.empty()) return out.str();
  check_same_classes(reports);
  for (const auto& [label, report] : reports) {
    out << label << ",overall," << shortest_repr(report.overall_map_50) << ","
        << shortest_repr(report.overall_mar_100) << "," << csv_value(report.overall_accuracy)
        << "\n";
    for (std::size_t c = 0; c < report.class_names.size(); ++c) {
      const auto& m = report.per_class[c];
      out << label << "," << report.class_names[c] << "," << csv_value(m.ap_50) << ","
          << csv_value(m.ar_100) << "," << csv_value(m.class_accuracy) << "\n";
    }
  }
  return out.str();
}

ordered_json detections_to_json(const std::map<std::string, std::vector<Detection>>& detections,
                                const std::vector<std::string>& class_names) {
  ordered_json out = ordered_json::array();
  for (const auto& [image_id, list] : detections) {
    for (const auto& d : list) {
      if (d.class_id < 0 || d.class_id >= static_cast<int>(class_names.size())) {
        throw Error("detection class out of range on image " + image_id);
      }
      ordered_json entry;
      entry["image_id"] = image_id;
      entry["class"] = class_names[static_cast<std::size_t>(d.class_id)];
      entry["score"] = d.score;
      entry["box"] = {{"x_min", d.box.x_min}, {"y_min", d.box.y_min},
                      {"x_max", d.box.x_max}, {"y_max", d.box.y_max}};
      out.push_back(entry);
    }
  }
  return out;
}

std::map<std::string, std::vector<Detection>> detections_from_json(
    const json& doc, const std::vector<std::string>& class_names) {
  if (!doc.is_array()) throw ValidationError("detections", std::nullopt, "expected an array");
  std::map<std::string, std::vector<Detection>> out;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const std::string field = "detections[" + std::to_string(i) + "]";
    try {
      const json& entry = doc[i];
      Detection d;
      d.class_id = class_index(class_names, entry.at("class").get<std::string>(), field + ".class");
      d.score = entry.at("score").get<double>();
      if (!(d.score >= 0.0 && d.score <= 1.0)) {
        throw ValidationError(field + ".score", i, "must be in [0, 1]");
      }
      const json& box = entry.at("box");
      d.box = {box.at("x_min").get<double>(), box.at("y_min").get<double>(),
               box.at("x_max").get<double>(), box.at("y_max").get<double>()};
      out[entry.at("image_id").get<std::string>()].push_back(d);
    } catch (const json::exception& e) {
      throw ValidationError(field, i, e.what());
    }
  }
  return out;
}

}  // namespace wildscan
