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

#include "wildscan/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "wildscan/common.hpp"

namespace wildscan {
namespace {

using nlohmann::ordered_json;

LossTerms& operator+=(LossTerms& a, const LossBreakdown& b) {
  a.head_classification += b.head_classification;
  a.head_regression += b.head_regression;
  a.rpn_objectness += b.rpn_objectness;
  a.rpn_regression += b.rpn_regression;
  a.total += b.total;
  return a;
}

LossTerms scaled(LossTerms t, double factor) {
  t.head_classification *= factor;
  t.head_regression *= factor;
  t.rpn_objectness *= factor;
  t.rpn_regression *= factor;
  t.total *= factor;
  return t;
}

class DetectorEpochRunner final : public EpochRunner {
 public:
  DetectorEpochRunner(Detector& model, std::vector<TrainingSample> samples,
                      const DatasetManifest& manifest, const ImageLoader& loader,
                      Split validation_split, const LossConfig& loss,
                      const OptimizerOptions& optimizer, std::uint64_t seed)
      : model_(model),
        best_(model),
        samples_(std::move(samples)),
        manifest_(manifest),
        loader_(loader),
        validation_split_(validation_split),
        loss_(loss),
        optimizer_(optimizer),
        rng_(seed),
        grads_(model.params()),
        velocity_(model.params()) {}

  void begin_cycle(int, bool restore_best) override {
    if (restore_best) model_.params() = best_.params();
    velocity_.zero();
  }

  LossTerms train_epoch(int epoch, double lr) override {
    std::vector<std::size_t> order(samples_.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng_() % i]);

    LossTerms sum;
    const auto batch = static_cast<std::size_t>(optimizer_.batch_size);
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t end = std::min(order.size(), start + batch);
      grads_.zero();
      for (std::size_t i = start; i < end; ++i) {
        const TrainingSample& original = samples_[order[i]];
        const bool flip = optimizer_.horizontal_flip && (rng_() & 1U);
        try {
          if (flip) {
            sum += model_.train_step(flipped(original), loss_, rng_, grads_);
          } else {
            sum += model_.train_step(original, loss_, rng_, grads_);
          }
        } catch (const NumericError& e) {
          throw NumericError(std::string(e.what()) + " (epoch " + std::to_string(epoch) +
                             ", batch " + std::to_string(start / batch + 1) + ")");
        }
      }
      apply_update(lr, static_cast<double>(end - start));
    }
    return scaled(sum, samples_.empty() ? 0.0 : 1.0 / static_cast<double>(samples_.size()));
  }

  double validate() override {
    return evaluate_map_50(model_, manifest_, validation_split_, loader_);
  }

  void save_best() override { best_.params() = model_.params(); }

  const Detector& best() const { return best_; }

 private:
  static TrainingSample flipped(const TrainingSample& sample) {
    TrainingSample out{flip_horizontal(sample.image), sample.ground_truths, sample.proposals};
    for (auto& gt : out.ground_truths) gt.box = flip_horizontal(gt.box, sample.image.width);
    if (out.proposals) {
      for (auto& box : *out.proposals) box = flip_horizontal(box, sample.image.width);
    }
    return out;
  }

  void apply_update(double lr, double count) {
    auto& params = model_.params();
    double norm_sq = 0.0;
    for (nn::ParamId id = 0; id < params.size(); ++id) {
      grads_[id] /= count;
      norm_sq += grads_[id].squaredNorm();
    }
    double clip = 1.0;
    const double norm = std::sqrt(norm_sq);
    if (optimizer_.max_grad_norm > 0.0 && norm > optimizer_.max_grad_norm) {
      clip = optimizer_.max_grad_norm / norm;
    }
    for (nn::ParamId id = 0; id < params.size(); ++id) {
      velocity_[id] = optimizer_.momentum * velocity_[id] + clip * grads_[id];
      params[id] -= lr * velocity_[id];
    }
  }

  Detector& model_;
  Detector best_;
  std::vector<TrainingSample> samples_;
  const DatasetManifest& manifest_;
  const ImageLoader& loader_;
  Split validation_split_;
  LossConfig loss_;
  OptimizerOptions optimizer_;
  std::mt19937_64 rng_;
  nn::GradStore grads_;
  nn::GradStore velocity_;
};

int class_index_of(const std::vector<std::string>& names, const std::string& eval_class,
                   const std::string& image_id) {
  const auto it = std::find(names.begin(), names.end(), eval_class);
  if (it == names.end()) {
    throw ValidationError("annotations", std::nullopt,
                          "class '" + eval_class + "' on image " + image_id +
                              " is not one of the detector classes");
  }
  return static_cast<int>(it - names.begin());
}

}  // namespace

void EarlyStopPolicy::validate() const {
  if (patience < 1) throw ValidationError("policy.patience", std::nullopt, "must be >= 1");
  if (!(min_improvement >= 0.0)) {
    throw ValidationError("policy.min_improvement", std::nullopt, "must be >= 0");
  }
  if (max_epochs_per_cycle < 0) {
    throw ValidationError("policy.max_epochs_per_cycle", std::nullopt, "must be >= 0");
  }
}

double LRCycleSchedule::lr_for_cycle(int cycle) const {
  return initial_lr * std::pow(escalation_factor, cycle);
}

void LRCycleSchedule::validate() const {
  if (!(initial_lr > 0.0)) throw ValidationError("schedule.initial_lr", std::nullopt, "must be > 0");
  if (!(escalation_factor > 1.0)) {
    throw ValidationError("schedule.escalation_factor", std::nullopt, "must be > 1");
  }
  if (max_cycles < 1) throw ValidationError("schedule.max_cycles", std::nullopt, "must be >= 1");
}

void OptimizerOptions::validate() const {
  if (batch_size < 1) throw ValidationError("schedule.batch_size", std::nullopt, "must be >= 1");
  if (!(momentum >= 0.0 && momentum < 1.0)) {
    throw ValidationError("schedule.momentum", std::nullopt, "must be in [0, 1)");
  }
  if (!(max_grad_norm >= 0.0)) {
    throw ValidationError("schedule.max_grad_norm", std::nullopt, "must be >= 0");
  }
}

std::string_view to_string(StoppingReason reason) {
  return reason == StoppingReason::no_new_best_in_cycle ? "no_new_best_in_cycle" : "max_cycles";
}

TrainReport run_training_cycles(EpochRunner& runner, const LRCycleSchedule& schedule,
                                const EarlyStopPolicy& policy,
                                const std::function<void(const EpochRecord&)>& on_epoch) {
  schedule.validate();
  policy.validate();
  TrainReport report;
  double best = -std::numeric_limits<double>::infinity();
  int epoch = 0;
  report.stopping_reason = StoppingReason::max_cycles;
  for (int cycle = 0; cycle < schedule.max_cycles; ++cycle) {
    const double lr = schedule.lr_for_cycle(cycle);
    runner.begin_cycle(cycle, cycle > 0);
    bool new_best = false;
    int since_best = 0;
    for (int in_cycle = 1;; ++in_cycle) {
      EpochRecord record;
      record.epoch = ++epoch;
      record.cycle = cycle;
      record.epoch_in_cycle = in_cycle;
      record.lr = lr;
      record.train_loss = runner.train_epoch(epoch, lr);
      record.validation_map_50 = runner.validate();
      if (record.validation_map_50 > best + policy.min_improvement) {
        best = record.validation_map_50;
        report.best_epoch = epoch;
        report.best_metric = best;
        record.improved = true;
        new_best = true;
        since_best = 0;
        runner.save_best();
      } else {
        ++since_best;
      }
      report.epochs.push_back(record);
      if (on_epoch) on_epoch(record);
      if (since_best >= policy.patience) break;
      if (policy.max_epochs_per_cycle > 0 && in_cycle >= policy.max_epochs_per_cycle) break;
    }
    if (!new_best) {
      report.stopping_reason = StoppingReason::no_new_best_in_cycle;
      break;
    }
  }
  return report;
}

ordered_json train_report_to_json(const TrainReport& report) {
  ordered_json j;
  j["best_epoch"] = report.best_epoch;
  j["best_metric"] = report.best_metric;
  j["stopping_reason"] = to_string(report.stopping_reason);
  j["checkpoint_path"] = report.checkpoint_path;
  ordered_json epochs = ordered_json::array();
  for (const auto& e : report.epochs) {
    ordered_json row;
    row["epoch"] = e.epoch;
    row["cycle"] = e.cycle;
    row["epoch_in_cycle"] = e.epoch_in_cycle;
    row["lr"] = e.lr;
    row["train_loss"] = {{"head_classification", e.train_loss.head_classification},
                         {"head_regression", e.train_loss.head_regression},
                         {"rpn_objectness", e.train_loss.rpn_objectness},
                         {"rpn_regression", e.train_loss.rpn_regression},
                         {"total", e.train_loss.total}};
    row["validation_map_50"] = e.validation_map_50;
    row["improved"] = e.improved;
    epochs.push_back(row);
  }
  j["epochs"] = epochs;
  return j;
}

std::string train_report_csv(const TrainReport& report) {
  std::ostringstream out;
  out << "epoch,cycle,epoch_in_cycle,lr,head_classification,head_regression,rpn_objectness,"
         "rpn_regression,total,validation_map_50,improved\n";
  for (const auto& e : report.epochs) {
    out << e.epoch << ',' << e.cycle << ',' << e.epoch_in_cycle << ',' << shortest_repr(e.lr) << ','
        << shortest_repr(e.train_loss.head_classification) << ','
        << shortest_repr(e.train_loss.head_regression) << ','
        << shortest_repr(e.train_loss.rpn_objectness) << ','
        << shortest_repr(e.train_loss.rpn_regression) << ',' << shortest_repr(e.train_loss.total)
        << ',' << shortest_repr(e.validation_map_50) << ',' << (e.improved ? 1 : 0) << '\n';
  }
  return out.str();
}

std::map<std::string, std::vector<Detection>> run_detector(const Detector& model,
                                                           const DatasetManifest& manifest,
                                                           std::optional<Split> split,
                                                           const ImageLoader& loader) {
  std::map<std::string, std::vector<Detection>> out;
  for (const auto& record : manifest.images) {
    if (split) {
      const auto it = manifest.splits.find(record.image_id);
      if (it == manifest.splits.end() || it->second != *split) continue;
    }
    out[record.image_id] = model.detect(loader(record));
  }
  return out;
}

double evaluate_map_50(const Detector& model, const DatasetManifest& manifest,
                       std::optional<Split> split, const ImageLoader& loader) {
  const auto& names = model.config().class_names;
  const auto detections = run_detector(model, manifest, split, loader);
  const auto inputs = eval_inputs(manifest, split, detections, names);
  return mean_present(per_class_ap50(inputs, static_cast<int>(names.size())));
}

double evaluate_on_validation(const Detector& model, const DatasetManifest& manifest,
                              const ImageLoader& loader) {
  if (manifest.images_in(Split::val).empty()) {
    throw ValidationError("splits", std::nullopt, "validation split is empty");
  }
  return evaluate_map_50(model, manifest, Split::val, loader);
}

std::vector<TrainingSample> training_samples(const DatasetManifest& manifest, Split split,
                                             const ImageLoader& loader,
                                             const std::vector<std::string>& class_names) {
  std::vector<TrainingSample> samples;
  for (const auto* record : manifest.images_in(split)) {
    TrainingSample sample{loader(*record), {}, std::nullopt};
    for (const auto* annotation : manifest.annotations_for(record->image_id)) {
      const auto eval_class = manifest.taxonomy.eval_class_of(annotation->category);
      if (!eval_class) {
        throw ValidationError("annotations", std::nullopt,
                              "unmapped category '" + annotation->category + "'");
      }
      sample.ground_truths.push_back(
          {annotation->box, class_index_of(class_names, *eval_class, record->image_id) + 1});
    }
    samples.push_back(std::move(sample));
  }
  return samples;
}

FitResult fit(const DatasetManifest& manifest, const ImageLoader& loader,
              DetectorConfig detector_config, const LossConfig& loss_config,
              const LRCycleSchedule& schedule, const EarlyStopPolicy& policy, std::uint64_t seed,
              const FitOptions& options) {
  loss_config.validate();
  schedule.validate();
  policy.validate();
  options.optimizer.validate();
  if (manifest.images_in(Split::train).empty()) {
    throw ValidationError("splits", std::nullopt, "train split is empty");
  }
  if (manifest.images_in(options.validation_split).empty()) {
    throw ValidationError("splits", std::nullopt,
                          std::string(to_string(options.validation_split)) + " split is empty");
  }
  detector_config.score_activation = activation_for(loss_config.classification_kind);
  detector_config.validate();

  Detector model(detector_config, seed);
  if (options.pretrained_weights) import_weights(model, *options.pretrained_weights);
  auto samples = training_samples(manifest, Split::train, loader, detector_config.class_names);
  DetectorEpochRunner runner(model, std::move(samples), manifest, loader, options.validation_split,
                             loss_config, options.optimizer, seed ^ 0x9E3779B97F4A7C15ULL);
  TrainReport report = run_training_cycles(runner, schedule, policy, options.on_epoch);
  Detector best = runner.best();
  if (options.checkpoint_path) {
    ordered_json metadata;
    metadata["loss"] = to_string(loss_config.classification_kind);
    metadata["seed"] = seed;
    metadata["best_epoch"] = report.best_epoch;
    metadata["best_validation_map_50"] = report.best_metric;
    save_checkpoint(best, *options.checkpoint_path, metadata);
    report.checkpoint_path = options.checkpoint_path->string();
  }
  return FitResult{std::move(report), std::move(best)};
}

}  // namespace wildscan
