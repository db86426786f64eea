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

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <sstream>

#include "wildscan/checkpoint.hpp"
#include "wildscan/common.hpp"
#include "wildscan/dataset.hpp"
#include "wildscan/image.hpp"

namespace wildscan {
namespace {

using nlohmann::json;
using nlohmann::ordered_json;

constexpr const char* kPredictionLog = "predictions.ndjson";
constexpr const char* kFeedbackLog = "feedback.ndjson";

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  const auto millis =
      std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[64];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d.%03lldZ", tm.tm_year + 1900,
                tm.tm_mon + 1, tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec,
                static_cast<long long>(millis));
  return buf;
}

ordered_json detection_json(const Detection& d, const std::vector<std::string>& class_names) {
  ordered_json j;
  j["class"] = class_names.at(static_cast<std::size_t>(d.class_id));
  j["score"] = d.score;
  j["box"] = {{"x_min", d.box.x_min}, {"y_min", d.box.y_min}, {"x_max", d.box.x_max},
              {"y_max", d.box.y_max}};
  return j;
}

Detection detection_from_json(const json& j, const std::vector<std::string>& class_names) {
  Detection d;
  const auto name = j.at("class").get<std::string>();
  const auto it = std::find(class_names.begin(), class_names.end(), name);
  d.class_id = it == class_names.end() ? -1 : static_cast<int>(it - class_names.begin());
  d.score = j.at("score").get<double>();
  const json& b = j.at("box");
  d.box = {b.at("x_min").get<double>(), b.at("y_min").get<double>(), b.at("x_max").get<double>(),
           b.at("y_max").get<double>()};
  return d;
}

ordered_json tally_json(const ClassTally& tally) {
  ordered_json j;
  j["correct"] = tally.correct;
  j["total"] = tally.total;
  if (tally.total == 0) {
    j["accuracy"] = nullptr;
    j["accuracy_percent"] = nullptr;
  } else {
    j["accuracy"] = static_cast<double>(tally.correct) / static_cast<double>(tally.total);
    j["accuracy_percent"] = percent_half_up(static_cast<std::int64_t>(tally.correct),
                                            static_cast<std::int64_t>(tally.total));
  }
  return j;
}

void append_line(std::ofstream& log, const ordered_json& record) {
  if (!log.is_open()) return;
  log << record.dump() << '\n';
  log.flush();
  if (!log) throw Error("failed to append to service log");
}

}  // namespace

std::string_view to_string(Verdict verdict) {
  return verdict == Verdict::correct ? "correct" : "incorrect";
}

Verdict parse_verdict(std::string_view text) {
  if (text == "correct") return Verdict::correct;
  if (text == "incorrect") return Verdict::incorrect;
  throw ValidationError("verdict", std::nullopt, "expected 'correct' or 'incorrect'");
}

StatsReport compute_stats(std::span<const FeedbackRecord> records,
                          const std::vector<std::string>& classes) {
  StatsReport stats;
  stats.classes = classes;
  for (const auto& name : classes) stats.misprediction_histogram[name] = 0;
  for (const auto& record : records) {
    if (std::find(classes.begin(), classes.end(), record.asserted_class) == classes.end()) {
      stats.classes.push_back(record.asserted_class);
      stats.misprediction_histogram.emplace(record.asserted_class, 0);
    }
    auto& tally = stats.per_class[record.asserted_class];
    ++tally.total;
    ++stats.overall.total;
    if (record.verdict == Verdict::correct) {
      ++tally.correct;
      ++stats.overall.correct;
    } else {
      if (std::find(stats.classes.begin(), stats.classes.end(), record.predicted_class) ==
          stats.classes.end()) {
        stats.classes.push_back(record.predicted_class);
      }
      ++stats.misprediction_histogram[record.predicted_class];
    }
  }
  return stats;
}

ordered_json stats_to_json(const StatsReport& stats) {
  ordered_json j;
  ordered_json per_class = ordered_json::object();
  for (const auto& name : stats.classes) {
    const auto it = stats.per_class.find(name);
    per_class[name] = it == stats.per_class.end() ? ordered_json(nullptr) : tally_json(it->second);
  }
  j["per_class"] = per_class;
  j["overall"] = tally_json(stats.overall);
  ordered_json histogram = ordered_json::object();
  for (const auto& name : stats.classes) {
    const auto it = stats.misprediction_histogram.find(name);
    histogram[name] = it == stats.misprediction_histogram.end() ? 0 : it->second;
  }
  j["misprediction_histogram"] = histogram;
  return j;
}

std::string format_stats_table(const StatsReport& stats) {
  std::ostringstream out;
  std::size_t width = 7;
  for (const auto& name : stats.classes) width = std::max(width, name.size());
  auto row = [&](const std::string& name, const std::optional<ClassTally>& tally) {
    std::string label = name;
    label.resize(width, ' ');
    out << label;
    if (!tally || tally->total == 0) {
      out << "  -\n";
      return;
    }
    char buf[64];
    std::snprintf(buf, sizeof buf, "  %zu/%zu  ", tally->correct, tally->total);
    out << buf
        << percent_half_up(static_cast<std::int64_t>(tally->correct),
                           static_cast<std::int64_t>(tally->total))
        << "%\n";
  };
  for (const auto& name : stats.classes) {
    const auto it = stats.per_class.find(name);
    row(name, it == stats.per_class.end() ? std::nullopt : std::optional<ClassTally>(it->second));
  }
  row("overall", stats.overall);
  out << "\nincorrect predictions by predicted class\n";
  for (const auto& name : stats.classes) {
    std::string label = name;
    label.resize(width, ' ');
    const auto it = stats.misprediction_histogram.find(name);
    out << label << "  " << (it == stats.misprediction_histogram.end() ? 0 : it->second) << "\n";
  }
  return out.str();
}

ordered_json prediction_to_json(const PredictionResponse& response,
                                const std::vector<std::string>& class_names) {
  ordered_json j;
  j["request_id"] = response.request_id;
  ordered_json detections = ordered_json::array();
  for (const auto& d : response.detections) detections.push_back(detection_json(d, class_names));
  j["detections"] = detections;
  j["model_version"] = response.model_version;
  j["latency_ms"] = response.latency_ms;
  return j;
}

ordered_json feedback_to_json(const FeedbackRecord& record) {
  ordered_json j;
  j["request_id"] = record.request_id;
  j["verdict"] = to_string(record.verdict);
  j["asserted_class"] = record.asserted_class;
  j["predicted_class"] = record.predicted_class;
  j["timestamp"] = record.timestamp;
  return j;
}

FeedbackRecord feedback_from_json(const json& doc) {
  try {
    FeedbackRecord record;
    record.request_id = doc.at("request_id").get<std::string>();
    record.verdict = parse_verdict(doc.at("verdict").get<std::string>());
    record.asserted_class = doc.at("asserted_class").get<std::string>();
    record.predicted_class = doc.value("predicted_class", std::string());
    record.timestamp = doc.value("timestamp", std::string());
    return record;
  } catch (const json::exception& e) {
    throw ValidationError("feedback", std::nullopt, e.what());
  }
}

std::string top1_class(std::span<const Detection> detections,
                       const std::vector<std::string>& class_names) {
  if (detections.empty()) return std::string(kNonWildlife);
  const auto best = std::max_element(
      detections.begin(), detections.end(),
      [](const Detection& a, const Detection& b) { return a.score < b.score; });
  return class_names.at(static_cast<std::size_t>(best->class_id));
}

std::shared_ptr<const LoadedModel> ModelSlot::get() const {
  std::lock_guard lock(mutex_);
  return model_;
}

void ModelSlot::set(std::shared_ptr<const LoadedModel> model) {
  std::lock_guard lock(mutex_);
  model_ = std::move(model);
}

InferenceService::InferenceService(ServiceConfig config)
    : config_(std::move(config)), id_rng_(std::random_device{}()) {
  if (config_.class_names.empty()) throw ValidationError("service.class_names", std::nullopt, "empty");
  if (!config_.data_dir.empty()) {
    std::filesystem::create_directories(config_.data_dir);
    replay();
    prediction_log_.open(config_.data_dir / kPredictionLog, std::ios::app);
    feedback_log_.open(config_.data_dir / kFeedbackLog, std::ios::app);
    if (!prediction_log_ || !feedback_log_) {
      throw Error("cannot open service logs in " + config_.data_dir.string());
    }
  }
}

InferenceService::~InferenceService() = default;

void InferenceService::replay() {
  auto each_line = [](const std::filesystem::path& path, auto&& handle) {
    std::ifstream in(path);
    if (!in) return;
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
      ++number;
      if (line.empty()) continue;
      try {
        handle(json::parse(line));
      } catch (const json::exception& e) {
        throw Error(path.string() + ":" + std::to_string(number) + ": " + e.what());
      }
    }
  };
  each_line(config_.data_dir / kPredictionLog, [&](const json& j) {
    StoredPrediction p;
    p.request_id = j.at("request_id").get<std::string>();
    p.model_version = j.at("model_version").get<std::string>();
    p.predicted_class = j.at("predicted_class").get<std::string>();
    for (const auto& d : j.at("detections")) p.detections.push_back(detection_from_json(d, config_.class_names));
    predictions_[p.request_id] = std::move(p);
  });
  each_line(config_.data_dir / kFeedbackLog, [&](const json& j) {
    FeedbackRecord record = feedback_from_json(j);
    feedback_by_request_[record.request_id] = record;
    feedback_.push_back(std::move(record));
  });
}

void InferenceService::check_classes(const DetectorConfig& config) const {
  if (config.class_names != config_.class_names) {
    std::string got;
    for (const auto& name : config.class_names) got += (got.empty() ? "" : ",") + name;
    throw ValidationError("checkpoint.classes", std::nullopt,
                          "model classes [" + got + "] do not match the service class list");
  }
}

std::string InferenceService::load_model(const std::filesystem::path& checkpoint) {
  LoadedCheckpoint loaded = load_checkpoint(checkpoint);
  check_classes(loaded.detector.config());
  auto model = std::make_shared<LoadedModel>();
  model->detector = std::make_shared<const Detector>(std::move(loaded.detector));
  model->model_version = loaded.info.model_version;
  slot_.set(model);
  return model->model_version;
}

void InferenceService::install_model(const Detector& model, const std::string& model_version) {
  check_classes(model.config());
  auto loaded = std::make_shared<LoadedModel>();
  loaded->detector = std::make_shared<const Detector>(model);
  loaded->model_version = model_version;
  slot_.set(loaded);
}

std::optional<std::string> InferenceService::model_version() const {
  const auto model = slot_.get();
  if (!model) return std::nullopt;
  return model->model_version;
}

std::string InferenceService::new_request_id() {
  // Caller holds store_mutex_.
  for (;;) {
    char buf[24];
    std::snprintf(buf, sizeof buf, "req-%016llx", static_cast<unsigned long long>(id_rng_()));
    if (!predictions_.count(buf)) return buf;
  }
}

PredictionResponse InferenceService::predict(std::span<const std::uint8_t> payload) {
  const auto start = std::chrono::steady_clock::now();
  if (payload.size() > config_.max_payload_bytes) {
    throw ValidationError("payload", std::nullopt,
                          "payload of " + std::to_string(payload.size()) + " bytes exceeds " +
                              std::to_string(config_.max_payload_bytes));
  }
  const Image image = decode_image(payload);
  const auto model = slot_.get();
  if (!model) throw UnavailableError("no model loaded");

  Image input = image;
  double scale = 1.0;
  const int side = std::max(image.width, image.height);
  if (config_.max_input_side > 0 && side > config_.max_input_side) {
    scale = static_cast<double>(config_.max_input_side) / side;
    input = resize_area(image, std::max(1, static_cast<int>(std::lround(image.width * scale))),
                        std::max(1, static_cast<int>(std::lround(image.height * scale))));
  }
  PredictionResponse response;
  response.detections = model->detector->detect(input);
  if (scale != 1.0) {
    const double sx = static_cast<double>(image.width) / input.width;
    const double sy = static_cast<double>(image.height) / input.height;
    for (auto& d : response.detections) {
      d.box = clip_box({d.box.x_min * sx, d.box.y_min * sy, d.box.x_max * sx, d.box.y_max * sy},
                       image.width, image.height);
    }
  }
  response.model_version = model->model_version;

  StoredPrediction stored;
  stored.model_version = response.model_version;
  stored.predicted_class = top1_class(response.detections, model->detector->config().class_names);
  stored.detections = response.detections;
  {
    std::lock_guard lock(store_mutex_);
    response.request_id = new_request_id();
    stored.request_id = response.request_id;
    ordered_json line;
    line["request_id"] = stored.request_id;
    line["model_version"] = stored.model_version;
    line["predicted_class"] = stored.predicted_class;
    ordered_json detections = ordered_json::array();
    for (const auto& d : stored.detections) detections.push_back(detection_json(d, config_.class_names));
    line["detections"] = detections;
    append_line(prediction_log_, line);
    predictions_[stored.request_id] = std::move(stored);
  }
  response.latency_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return response;
}

std::vector<std::string> InferenceService::stats_classes() const {
  std::vector<std::string> classes = config_.class_names;
  if (std::find(classes.begin(), classes.end(), kNonWildlife) == classes.end()) {
    classes.emplace_back(kNonWildlife);
  }
  return classes;
}

FeedbackRecord InferenceService::submit_feedback(const std::string& request_id, Verdict verdict,
                                                 const std::string& asserted_class) {
  const auto classes = stats_classes();
  if (std::find(classes.begin(), classes.end(), asserted_class) == classes.end()) {
    throw ValidationError("asserted_class", std::nullopt, "unknown class '" + asserted_class + "'");
  }
  std::lock_guard lock(store_mutex_);
  const auto it = predictions_.find(request_id);
  if (it == predictions_.end()) throw NotFoundError("unknown request_id '" + request_id + "'");
  if (feedback_by_request_.count(request_id)) {
    throw ConflictError("feedback already recorded for '" + request_id + "'");
  }
  FeedbackRecord record{request_id, verdict, asserted_class, it->second.predicted_class,
                        utc_timestamp()};
  append_line(feedback_log_, feedback_to_json(record));
  feedback_by_request_[request_id] = record;
  feedback_.push_back(record);
  return record;
}

StatsReport InferenceService::stats() const {
  std::lock_guard lock(store_mutex_);
  return compute_stats(feedback_, stats_classes());
}

std::vector<FeedbackRecord> InferenceService::feedback() const {
  std::lock_guard lock(store_mutex_);
  return feedback_;
}

std::optional<StoredPrediction> InferenceService::prediction(const std::string& request_id) const {
  std::lock_guard lock(store_mutex_);
  const auto it = predictions_.find(request_id);
  if (it == predictions_.end()) return std::nullopt;
  return it->second;
}

}  // namespace wildscan
