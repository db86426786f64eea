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
#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "wildscan/image.hpp"
#include "wildscan/losses.hpp"
#include "wildscan/nms.hpp"
#include "wildscan/nn.hpp"

namespace wildscan {

enum class BackboneProfile { desk_convnet, densenet121_style };
// How class scores are read off the head logits: softmax over background and
// foreground (cross-entropy training) or per-class logistic (asymmetric focal).
enum class ScoreActivation { softmax, sigmoid };

std::string_view to_string(BackboneProfile profile);
BackboneProfile parse_backbone_profile(std::string_view text);
std::string_view to_string(ScoreActivation activation);
ScoreActivation parse_score_activation(std::string_view text);
ScoreActivation activation_for(ClassificationKind kind);

struct DetectorConfig {
  BackboneProfile backbone_profile = BackboneProfile::desk_convnet;
  int feature_stride = 16;
  std::vector<double> anchor_scales = {32.0, 64.0, 128.0};
  std::vector<double> anchor_ratios = {0.5, 1.0, 2.0};
  int rpn_pre_nms_top_n = 1000;
  int rpn_post_nms_top_n = 300;
  double rpn_nms_iou = 0.7;
  std::array<int, 2> roi_output_size = {7, 7};
  // Foreground classes plus background.
  int num_classes = 5;
  double score_threshold = 0.5;
  double detection_nms_iou = 0.5;
  int max_detections = 100;

  std::vector<std::string> class_names = {"elephant", "tiger", "pangolin", "non_wildlife"};
  ScoreActivation score_activation = ScoreActivation::softmax;

  // desk_convnet: one conv3x3 + ReLU + 2x2 max-pool stage per entry, so the
  // stride is 2^stages.
  std::vector<int> backbone_channels = {16, 32, 48, 64};
  // densenet121_style: stem, four dense blocks, three transitions (stride 16).
  int dense_growth_rate = 32;
  std::vector<int> dense_block_layers = {6, 12, 24, 16};
  int dense_stem_channels = 64;

  int rpn_channels = 64;
  int head_hidden = 128;

  // Training-time sampling and assignment.
  int rpn_batch_size = 128;
  double rpn_positive_fraction = 0.5;
  double rpn_positive_iou = 0.7;
  double rpn_negative_iou = 0.3;
  int roi_batch_size = 64;
  double roi_positive_fraction = 0.25;
  double roi_positive_iou = 0.5;
  double roi_negative_iou = 0.5;

  int anchors_per_cell() const {
    return static_cast<int>(anchor_scales.size() * anchor_ratios.size());
  }
  void validate() const;
};

nlohmann::ordered_json detector_config_to_json(const DetectorConfig& config);
// Missing keys keep their defaults; unknown keys are rejected.
DetectorConfig detector_config_from_json(const nlohmann::json& doc);

struct TrainingSample {
  Image image;
  std::vector<GroundTruth> ground_truths;  // class_index 1..K
  // Fixed region proposals used instead of the RPN's own (ground truth boxes
  // are still appended). Makes the head loss a smooth function of the weights.
  std::optional<std::vector<Box>> proposals;
};

// Gradient capture at the last backbone layer for one target logit.
struct GradientCapture {
  nn::FeatureMap activations;
  nn::FeatureMap gradients;
  std::vector<Detection> detections;
  int target_class = 0;        // foreground class id
  double target_logit = 0.0;   // scaled
  std::optional<double> target_score;  // detection score when targeting a detection
};

// Two-stage detector: backbone -> RPN -> ROI-align -> detection head.
class Detector {
 public:
  explicit Detector(DetectorConfig config, std::uint64_t init_seed = 0);
  Detector(const Detector& other);
  Detector& operator=(const Detector& other);
  Detector(Detector&&) noexcept;
  Detector& operator=(Detector&&) noexcept;
  ~Detector();

  const DetectorConfig& config() const { return config_; }
  nn::ParamStore& params() { return params_; }
  const nn::ParamStore& params() const { return params_; }

  // Deterministic for fixed weights and input; safe to call concurrently.
  std::vector<Detection> detect(const Image& image) const;

  // Forward + backward for one image; accumulates parameter gradients and
  // returns the loss terms. Throws NumericError on a non-finite term.
  LossBreakdown train_step(const TrainingSample& sample, const LossConfig& loss,
                           std::mt19937_64& rng, nn::GradStore& grads) const;

  // Exactly one of detection_index / class_id. class_id picks the
  // highest-scoring detection of that class, or else the proposal with the
  // largest logit for it.
  GradientCapture capture_gradients(const Image& image, std::optional<std::size_t> detection_index,
                                    std::optional<int> class_id, double logit_scale = 1.0) const;

  // Number of detections whose decoded box had to be widened to one pixel
  // since construction (diagnostic only).
  std::uint64_t clamp_events() const;

 private:
  struct Impl;
  DetectorConfig config_;
  nn::ParamStore params_;
  std::unique_ptr<Impl> impl_;
};

// Runs `model` with the inference settings of `config` (score threshold,
// NMS, proposal counts, max detections). Throws if the config's class count
// or stride do not match the model.
std::vector<Detection> detect(const Image& image, const Detector& model,
                              const DetectorConfig& config);

}  // namespace wildscan
