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

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "wildscan/checkpoint.hpp"
#include "wildscan/dataset.hpp"
#include "wildscan/detector.hpp"
#include "wildscan/image_source.hpp"
#include "wildscan/losses.hpp"
#include "wildscan/metrics.hpp"

namespace wildscan {

// Validation-driven early stopping on mAP_50 (maximized).
struct EarlyStopPolicy {
  int patience = 15;
  // An epoch improves when its metric exceeds the best so far by more than this.
  double min_improvement = 1e-6;
  // Hard cap on epochs per cycle; 0 means no cap.
  int max_epochs_per_cycle = 0;

  void validate() const;
};

struct LRCycleSchedule {
  double initial_lr = 0.01;
  double escalation_factor = 2.0;
  int max_cycles = 3;

  // initial_lr * escalation_factor^cycle, cycle counted from 0.
  double lr_for_cycle(int cycle) const;
  void validate() const;
};

struct OptimizerOptions {
  int batch_size = 2;
  double momentum = 0.9;
  bool horizontal_flip = true;
  // Global gradient-norm clip per step; 0 disables it.
  double max_grad_norm = 10.0;

  void validate() const;
};

struct LossTerms {
  double head_classification = 0.0;
  double head_regression = 0.0;
  double rpn_objectness = 0.0;
  double rpn_regression = 0.0;
  double total = 0.0;
};

struct EpochRecord {
  int epoch = 0;           // 1-based, counted across cycles
  int cycle = 0;           // 0-based
  int epoch_in_cycle = 0;  // 1-based
  double lr = 0.0;
  LossTerms train_loss;    // mean over the epoch's samples
  double validation_map_50 = 0.0;
  bool improved = false;
};

enum class StoppingReason { no_new_best_in_cycle, max_cycles };
std::string_view to_string(StoppingReason reason);

struct TrainReport {
  std::vector<EpochRecord> epochs;
  int best_epoch = 0;
  double best_metric = 0.0;
  StoppingReason stopping_reason = StoppingReason::max_cycles;
  std::string checkpoint_path;
};

nlohmann::ordered_json train_report_to_json(const TrainReport& report);
std::string train_report_csv(const TrainReport& report);

// What the cycle driver needs from a training run. Separate from the
// detector so the stopping logic can be driven by a scripted metric.
class EpochRunner {
 public:
  virtual ~EpochRunner() = default;
  // Starts a cycle: drop optimizer state (and, after the first cycle, reload
  // the best weights).
  virtual void begin_cycle(int cycle, bool restore_best) = 0;
  virtual LossTerms train_epoch(int epoch, double lr) = 0;
  virtual double validate() = 0;
  virtual void save_best() = 0;
};

// Runs epochs in a cycle until `patience` epochs pass without improvement,
// then escalates the learning rate and restarts from the best weights.
// Stops after a cycle with no new best or after max_cycles.
TrainReport run_training_cycles(EpochRunner& runner, const LRCycleSchedule& schedule,
                                const EarlyStopPolicy& policy,
                                const std::function<void(const EpochRecord&)>& on_epoch = {});

// Runs the detector over the images of `split`.
std::map<std::string, std::vector<Detection>> run_detector(const Detector& model,
                                                           const DatasetManifest& manifest,
                                                           std::optional<Split> split,
                                                           const ImageLoader& loader);

// mAP_50 over the validation split.
double evaluate_on_validation(const Detector& model, const DatasetManifest& manifest,
                              const ImageLoader& loader);

// mAP_50 over `split` (all images when nullopt).
double evaluate_map_50(const Detector& model, const DatasetManifest& manifest,
                       std::optional<Split> split, const ImageLoader& loader);

// Training samples for the images of `split`, classes indexed by the
// detector's class_names (1-based).
std::vector<TrainingSample> training_samples(const DatasetManifest& manifest, Split split,
                                             const ImageLoader& loader,
                                             const std::vector<std::string>& class_names);

struct FitOptions {
  OptimizerOptions optimizer;
  // Written with the best weights after training when set.
  std::optional<std::filesystem::path> checkpoint_path;
  // Weight blob imported (matching names and shapes) before the first epoch.
  std::optional<std::filesystem::path> pretrained_weights;
  // Evaluate on this split instead of val (e.g. train for overfit runs).
  Split validation_split = Split::val;
  std::function<void(const EpochRecord&)> on_epoch;
};

struct FitResult {
  TrainReport report;
  Detector model;  // best weights
};

// SGD with momentum over the train split, early stopping on validation
// mAP_50, learning-rate cycling. The detector's score activation follows the
// loss kind. Deterministic for a fixed seed.
FitResult fit(const DatasetManifest& manifest, const ImageLoader& loader,
              DetectorConfig detector_config, const LossConfig& loss_config,
              const LRCycleSchedule& schedule, const EarlyStopPolicy& policy, std::uint64_t seed,
              const FitOptions& options = {});

}  // namespace wildscan
