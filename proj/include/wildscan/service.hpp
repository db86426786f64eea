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

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "wildscan/detector.hpp"

namespace wildscan {

inline constexpr std::size_t kMaxPayloadBytes = 10 * 1024 * 1024;

struct ServiceConfig {
  // Class list a checkpoint must carry to be accepted.
  std::vector<std::string> class_names = {"elephant", "tiger", "pangolin", "non_wildlife"};
  std::size_t max_payload_bytes = kMaxPayloadBytes;
  // Larger inputs are downscaled (aspect kept) before detection and boxes
  // mapped back; 0 disables resizing.
  int max_input_side = 1024;
  // Directory for the append-only logs; empty keeps everything in memory.
  std::filesystem::path data_dir;
};

struct PredictionResponse {
  std::string request_id;
  std::vector<Detection> detections;
  std::string model_version;
  double latency_ms = 0.0;
};

enum class Verdict { correct, incorrect };
std::string_view to_string(Verdict verdict);
Verdict parse_verdict(std::string_view text);

struct FeedbackRecord {
  std::string request_id;
  Verdict verdict = Verdict::correct;
  std::string asserted_class;
  std::string predicted_class;
  std::string timestamp;  // ISO 8601 UTC
};

struct ClassTally {
  std::size_t correct = 0;
  std::size_t total = 0;
};

struct StatsReport {
  std::vector<std::string> classes;  // display order
  std::map<std::string, ClassTally> per_class;  // classes with feedback only
  ClassTally overall;
  // Predicted-class counts over incorrect records, every class listed.
  std::map<std::string, std::size_t> misprediction_histogram;
};

// Groups by asserted_class; correctness comes from the verdict.
StatsReport compute_stats(std::span<const FeedbackRecord> records,
                          const std::vector<std::string>& classes);
// Accuracies as fractions plus two-decimal half-up percentage strings;
// absent classes and an empty overall are null.
nlohmann::ordered_json stats_to_json(const StatsReport& stats);
std::string format_stats_table(const StatsReport& stats);

nlohmann::ordered_json prediction_to_json(const PredictionResponse& response,
                                          const std::vector<std::string>& class_names);
nlohmann::ordered_json feedback_to_json(const FeedbackRecord& record);
FeedbackRecord feedback_from_json(const nlohmann::json& doc);

// Top-1 class of a response: class of the highest-scoring detection, or
// non_wildlife when there is none.
std::string top1_class(std::span<const Detection> detections,
                       const std::vector<std::string>& class_names);

struct LoadedModel {
  std::shared_ptr<const Detector> detector;
  std::string model_version;
};

// Holds the serving model. Readers take a reference that keeps the model
// alive until they finish; set() swaps it for new readers.
class ModelSlot {
 public:
  std::shared_ptr<const LoadedModel> get() const;
  void set(std::shared_ptr<const LoadedModel> model);

 private:
  mutable std::mutex mutex_;
  std::shared_ptr<const LoadedModel> model_;
};

struct StoredPrediction {
  std::string request_id;
  std::string model_version;
  std::string predicted_class;
  std::vector<Detection> detections;
};

// Prediction and feedback loop behind the HTTP API. Thread-safe.
class InferenceService {
 public:
  // Replays the logs in config.data_dir when present.
  explicit InferenceService(ServiceConfig config);
  ~InferenceService();

  const ServiceConfig& config() const { return config_; }

  // Loads and validates a checkpoint, then swaps it in. On any error the
  // previous model keeps serving.
  std::string load_model(const std::filesystem::path& checkpoint);
  // Installs an in-memory model under the given version.
  void install_model(const Detector& model, const std::string& model_version);
  std::optional<std::string> model_version() const;

  // Throws DecodeError for undecodable payloads, ValidationError when the
  // payload is too large, UnavailableError without a model.
  PredictionResponse predict(std::span<const std::uint8_t> payload);

  // Throws NotFoundError for an unknown request_id, ConflictError when the
  // request already has feedback, ValidationError for an unknown class.
  FeedbackRecord submit_feedback(const std::string& request_id, Verdict verdict,
                                 const std::string& asserted_class);

  StatsReport stats() const;
  std::vector<FeedbackRecord> feedback() const;
  std::optional<StoredPrediction> prediction(const std::string& request_id) const;

 private:
  void check_classes(const DetectorConfig& config) const;
  std::vector<std::string> stats_classes() const;
  std::string new_request_id();
  void replay();

  ServiceConfig config_;
  ModelSlot slot_;

  mutable std::mutex store_mutex_;
  std::map<std::string, StoredPrediction> predictions_;
  std::map<std::string, FeedbackRecord> feedback_by_request_;
  std::vector<FeedbackRecord> feedback_;
  std::ofstream prediction_log_;
  std::ofstream feedback_log_;
  std::mt19937_64 id_rng_;
};

// HTTP front end: POST /v1/predict, POST /v1/feedback, GET /v1/stats,
// GET /v1/health.
class HttpServer {
 public:
  explicit HttpServer(InferenceService& service);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  // Binds and serves until stop(); returns false if binding fails.
  bool listen(const std::string& host, int port);
  // Binds to a free port and returns it (-1 on failure); then call serve().
  int bind_any_port(const std::string& host);
  bool serve();
  void stop();
  void wait_until_ready() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace wildscan
