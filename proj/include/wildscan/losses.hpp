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
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "wildscan/box.hpp"
#include "wildscan/box_coding.hpp"

namespace wildscan {

inline constexpr double kProbabilityEpsilon = 1e-12;

enum class ClassificationKind { cross_entropy, asymmetric_focal };

std::string_view to_string(ClassificationKind kind);
ClassificationKind parse_classification_kind(std::string_view text);

struct LossConfig {
  ClassificationKind classification_kind = ClassificationKind::cross_entropy;
  // Focusing exponents and probability margin; asymmetric_focal only.
  double gamma_pos = 1.0;
  double gamma_neg = 4.0;
  double margin = 0.05;
  // lambda: weight of both box regression terms.
  double regression_weight = 1.0;
  double smooth_l1_beta = 1.0 / 9.0;

  void validate() const;
};

// -log p_target over a probability distribution (sum 1 within 1e-6);
// p_target is clamped at kProbabilityEpsilon.
double cross_entropy_loss(std::span<const double> class_scores, int target);

// Sum over classes of
//   y = 1: -(1 - p)^gamma_pos * log(p)
//   y = 0: -(p_m)^gamma_neg * log(1 - p_m),  p_m = max(p - margin, 0)
// with log arguments clamped at kProbabilityEpsilon. Background is the
// all-zeros target vector.
double asymmetric_focal_loss(std::span<const double> probabilities, std::span<const int> targets,
                             const LossConfig& config);

// Summed over the four coordinates: 0.5 d^2 / beta if |d| < beta, else
// |d| - 0.5 beta.
double smooth_l1_loss(const BoxDelta& predicted, const BoxDelta& target, double beta);
// d smooth_l1 / d predicted.
BoxDelta smooth_l1_gradient(const BoxDelta& predicted, const BoxDelta& target, double beta);

double sigmoid(double x);
std::vector<double> softmax(std::span<const double> logits);

struct LossWithGradient {
  double loss = 0.0;
  std::vector<double> gradient;  // w.r.t. the logits
};

LossWithGradient softmax_cross_entropy(std::span<const double> logits, int target);
// Logits are per-class logistic outputs, one per foreground class.
LossWithGradient sigmoid_asymmetric_focal(std::span<const double> logits,
                                          std::span<const int> targets, const LossConfig& config);
// Numerically stable binary cross-entropy on a logit; returns (loss, dloss/dlogit).
std::pair<double, double> sigmoid_binary_cross_entropy(double logit, int label);

// ---------------------------------------------------------------------------
// Target assignment

enum class SampleKind : std::uint8_t { positive, negative, ignore };

struct AssignmentThresholds {
  double positive_iou = 0.7;
  double negative_iou = 0.3;
  // Also mark, for each ground truth, the reference box(es) with the highest
  // IoU as positive (when that IoU is > 0).
  bool match_best_per_ground_truth = true;
};

struct GroundTruth {
  Box box;
  int class_index = 1;  // 1..K; 0 is background
};

struct TrainingTargets {
  std::vector<SampleKind> kind;
  std::vector<int> class_target;  // 0 for background and ignored samples
  std::vector<int> matched_ground_truth;  // -1 unless positive
  std::vector<BoxDelta> regression;       // defined for positives only

  std::size_t size() const { return kind.size(); }
  std::size_t count(SampleKind k) const;
};

// Each reference box is matched to its highest-IoU ground truth (first on
// ties): positive if IoU >= positive_iou, negative if < negative_iou, ignored
// otherwise. No ground truth makes every reference negative.
TrainingTargets assign_targets(std::span<const Box> references,
                               std::span<const GroundTruth> ground_truths,
                               const AssignmentThresholds& thresholds);

// ---------------------------------------------------------------------------
// Multi-task objective

// Per-sample outputs aligned with the corresponding TrainingTargets.
struct RpnOutputs {
  std::vector<double> objectness_logits;
  std::vector<BoxDelta> deltas;
};

struct HeadOutputs {
  // One row per sample with num_classes logits; entry 0 is background. In
  // asymmetric-focal mode entry 0 is unused.
  std::vector<std::vector<double>> class_logits;
  // Regression output for each sample's target class (read for positives).
  std::vector<BoxDelta> deltas;
};

struct LossBreakdown {
  double head_classification = 0.0;
  double head_regression = 0.0;
  double rpn_objectness = 0.0;
  double rpn_regression = 0.0;
  double total = 0.0;

  std::vector<double> d_objectness_logits;
  std::vector<BoxDelta> d_rpn_deltas;
  std::vector<std::vector<double>> d_class_logits;
  std::vector<BoxDelta> d_head_deltas;
};

// total = L_cls(head) + lambda * L_reg(head) + L_obj(rpn) + lambda * L_reg(rpn).
// Classification and objectness terms are averaged over positive and negative
// samples, regression terms over positives; a term with no samples is 0.
LossBreakdown multitask_loss(const RpnOutputs& rpn, const HeadOutputs& head,
                             const TrainingTargets& rpn_targets,
                             const TrainingTargets& head_targets, const LossConfig& config);

}  // namespace wildscan
