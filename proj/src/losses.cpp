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

#include "wildscan/losses.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "wildscan/common.hpp"

namespace wildscan {
namespace {

double clamped_log(double x) { return std::log(std::max(x, kProbabilityEpsilon)); }

double focal_positive(double p, double gamma) {
  return -std::pow(1.0 - p, gamma) * clamped_log(p);
}

double focal_negative(double p, double gamma, double margin) {
  const double shifted = std::max(p - margin, 0.0);
  if (shifted <= 0.0) return 0.0;
  return -std::pow(shifted, gamma) * clamped_log(1.0 - shifted);
}

}  // namespace

std::string_view to_string(ClassificationKind kind) {
  return kind == ClassificationKind::cross_entropy ? "cross_entropy" : "asymmetric_focal";
}

ClassificationKind parse_classification_kind(std::string_view text) {
  if (text == "cross_entropy") return ClassificationKind::cross_entropy;
  if (text == "asymmetric_focal") return ClassificationKind::asymmetric_focal;
  throw ValidationError("loss.classification_kind", std::nullopt,
                        "unknown kind '" + std::string(text) + "'");
}

void LossConfig::validate() const {
  if (!(gamma_pos >= 0.0)) throw ValidationError("loss.gamma_pos", std::nullopt, "must be >= 0");
  if (!(gamma_neg >= 0.0)) throw ValidationError("loss.gamma_neg", std::nullopt, "must be >= 0");
  if (!(margin >= 0.0 && margin < 1.0)) {
    throw ValidationError("loss.margin", std::nullopt, "must be in [0, 1)");
  }
  if (!(regression_weight > 0.0)) {
    throw ValidationError("loss.regression_weight", std::nullopt, "must be > 0");
  }
  if (!(smooth_l1_beta > 0.0)) {
    throw ValidationError("loss.smooth_l1_beta", std::nullopt, "must be > 0");
  }
}

double cross_entropy_loss(std::span<const double> class_scores, int target) {
  if (target < 0 || static_cast<std::size_t>(target) >= class_scores.size()) {
    throw Error("cross_entropy_loss: target out of range");
  }
  const double total = std::accumulate(class_scores.begin(), class_scores.end(), 0.0);
  if (std::abs(total - 1.0) > 1e-6) throw Error("cross_entropy_loss: scores do not sum to 1");
  return -clamped_log(class_scores[static_cast<std::size_t>(target)]);
}

double asymmetric_focal_loss(std::span<const double> probabilities, std::span<const int> targets,
                             const LossConfig& config) {
  if (probabilities.size() != targets.size()) {
    throw Error("asymmetric_focal_loss: probabilities and targets differ in length");
  }
  double loss = 0.0;
  for (std::size_t c = 0; c < probabilities.size(); ++c) {
    const double p = probabilities[c];
    if (!(p >= 0.0 && p <= 1.0)) throw Error("asymmetric_focal_loss: probability outside [0, 1]");
    loss += targets[c] != 0 ? focal_positive(p, config.gamma_pos)
                            : focal_negative(p, config.gamma_neg, config.margin);
  }
  return loss;
}

double smooth_l1_loss(const BoxDelta& predicted, const BoxDelta& target, double beta) {
  double loss = 0.0;
  for (int i = 0; i < 4; ++i) {
    const double d = std::abs(predicted[i] - target[i]);
    loss += d < beta ? 0.5 * d * d / beta : d - 0.5 * beta;
  }
  return loss;
}

BoxDelta smooth_l1_gradient(const BoxDelta& predicted, const BoxDelta& target, double beta) {
  BoxDelta grad;
  for (int i = 0; i < 4; ++i) {
    const double d = predicted[i] - target[i];
    grad[i] = std::abs(d) < beta ? d / beta : (d > 0 ? 1.0 : -1.0);
  }
  return grad;
}

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

std::vector<double> softmax(std::span<const double> logits) {
  const double peak = *std::max_element(logits.begin(), logits.end());
  std::vector<double> out(logits.size());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - peak);
    total += out[i];
  }
  for (double& v : out) v /= total;
  return out;
}

LossWithGradient softmax_cross_entropy(std::span<const double> logits, int target) {
  LossWithGradient out;
  out.gradient = softmax(logits);
  out.loss = -clamped_log(out.gradient[static_cast<std::size_t>(target)]);
  out.gradient[static_cast<std::size_t>(target)] -= 1.0;
  return out;
}

LossWithGradient sigmoid_asymmetric_focal(std::span<const double> logits,
                                          std::span<const int> targets, const LossConfig& config) {
  LossWithGradient out;
  out.gradient.resize(logits.size());
  for (std::size_t c = 0; c < logits.size(); ++c) {
    const double p = sigmoid(logits[c]);
    const double dp_dz = p * (1.0 - p);
    if (targets[c] != 0) {
      const double g = config.gamma_pos;
      out.loss += focal_positive(p, g);
      // d/dz of -(1-p)^g log p = (1-p)^g * (g * p * log p - (1 - p))
      out.gradient[c] = std::pow(1.0 - p, g) * (g * p * clamped_log(p) - (1.0 - p));
    } else {
      const double shifted = std::max(p - config.margin, 0.0);
      if (shifted <= 0.0) continue;
      const double g = config.gamma_neg;
      out.loss += focal_negative(p, g, config.margin);
      double d_shifted = std::pow(shifted, g) / std::max(1.0 - shifted, kProbabilityEpsilon);
      if (g != 0.0) d_shifted -= g * std::pow(shifted, g - 1.0) * clamped_log(1.0 - shifted);
      out.gradient[c] = d_shifted * dp_dz;
    }
  }
  return out;
}

std::pair<double, double> sigmoid_binary_cross_entropy(double logit, int label) {
  // log(1 + exp(-|x|)) + max(x, 0) - x * y
  const double loss =
      std::log1p(std::exp(-std::abs(logit))) + std::max(logit, 0.0) - logit * (label != 0 ? 1.0 : 0.0);
  return {loss, sigmoid(logit) - (label != 0 ? 1.0 : 0.0)};
}

std::size_t TrainingTargets::count(SampleKind k) const {
  return static_cast<std::size_t>(std::count(kind.begin(), kind.end(), k));
}

TrainingTargets assign_targets(std::span<const Box> references,
                               std::span<const GroundTruth> ground_truths,
                               const AssignmentThresholds& thresholds) {
  const std::size_t n = references.size();
  TrainingTargets targets;
  targets.kind.assign(n, SampleKind::negative);
  targets.class_target.assign(n, 0);
  targets.matched_ground_truth.assign(n, -1);
  targets.regression.assign(n, BoxDelta{});
  if (ground_truths.empty()) return targets;

  const std::size_t m = ground_truths.size();
  std::vector<double> overlaps(n * m);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) overlaps[i * m + j] = iou(references[i], ground_truths[j].box);
  }

  std::vector<int> best_gt(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    double best = -1.0;
    for (std::size_t j = 0; j < m; ++j) {
      if (overlaps[i * m + j] > best) {
        best = overlaps[i * m + j];
        best_gt[i] = static_cast<int>(j);
      }
    }
    if (best >= thresholds.positive_iou) {
      targets.kind[i] = SampleKind::positive;
    } else if (best < thresholds.negative_iou) {
      targets.kind[i] = SampleKind::negative;
    } else {
      targets.kind[i] = SampleKind::ignore;
    }
  }

  if (thresholds.match_best_per_ground_truth) {
    for (std::size_t j = 0; j < m; ++j) {
      double best = 0.0;
      for (std::size_t i = 0; i < n; ++i) best = std::max(best, overlaps[i * m + j]);
      if (best <= 0.0) continue;
      for (std::size_t i = 0; i < n; ++i) {
        if (overlaps[i * m + j] == best) targets.kind[i] = SampleKind::positive;
      }
    }
  }

  for (std::size_t i = 0; i < n; ++i) {
    if (targets.kind[i] != SampleKind::positive) continue;
    const auto& gt = ground_truths[static_cast<std::size_t>(best_gt[i])];
    targets.matched_ground_truth[i] = best_gt[i];
    targets.class_target[i] = gt.class_index;
    targets.regression[i] = encode_boxes(gt.box, references[i]);
  }
  return targets;
}

LossBreakdown multitask_loss(const RpnOutputs& rpn, const HeadOutputs& head,
                             const TrainingTargets& rpn_targets,
                             const TrainingTargets& head_targets, const LossConfig& config) {
  if (rpn.objectness_logits.size() != rpn_targets.size() ||
      rpn.deltas.size() != rpn_targets.size()) {
    throw Error("multitask_loss: RPN outputs and targets differ in length");
  }
  if (head.class_logits.size() != head_targets.size() || head.deltas.size() != head_targets.size()) {
    throw Error("multitask_loss: head outputs and targets differ in length");
  }
  const double beta = config.smooth_l1_beta;
  const double lambda = config.regression_weight;
  LossBreakdown out;

  // RPN objectness and regression.
  const std::size_t rpn_count = rpn_targets.size();
  out.d_objectness_logits.assign(rpn_count, 0.0);
  out.d_rpn_deltas.assign(rpn_count, BoxDelta{});
  const std::size_t rpn_pos = rpn_targets.count(SampleKind::positive);
  const std::size_t rpn_sampled = rpn_pos + rpn_targets.count(SampleKind::negative);
  for (std::size_t i = 0; i < rpn_count; ++i) {
    const SampleKind kind = rpn_targets.kind[i];
    if (kind == SampleKind::ignore) continue;
    const auto [loss, grad] =
        sigmoid_binary_cross_entropy(rpn.objectness_logits[i], kind == SampleKind::positive);
    out.rpn_objectness += loss / static_cast<double>(rpn_sampled);
    out.d_objectness_logits[i] = grad / static_cast<double>(rpn_sampled);
    if (kind == SampleKind::positive) {
      const double n = static_cast<double>(rpn_pos);
      out.rpn_regression += smooth_l1_loss(rpn.deltas[i], rpn_targets.regression[i], beta) / n;
      BoxDelta g = smooth_l1_gradient(rpn.deltas[i], rpn_targets.regression[i], beta);
      for (int k = 0; k < 4; ++k) out.d_rpn_deltas[i][k] = lambda * g[k] / n;
    }
  }

  // Detection head classification and regression.
  const std::size_t head_count = head_targets.size();
  out.d_class_logits.resize(head_count);
  out.d_head_deltas.assign(head_count, BoxDelta{});
  const std::size_t head_pos = head_targets.count(SampleKind::positive);
  const std::size_t head_sampled = head_pos + head_targets.count(SampleKind::negative);
  for (std::size_t i = 0; i < head_count; ++i) {
    const auto& logits = head.class_logits[i];
    out.d_class_logits[i].assign(logits.size(), 0.0);
    const SampleKind kind = head_targets.kind[i];
    if (kind == SampleKind::ignore) continue;
    const int target = kind == SampleKind::positive ? head_targets.class_target[i] : 0;
    const double n = static_cast<double>(head_sampled);
    if (config.classification_kind == ClassificationKind::cross_entropy) {
      const auto result = softmax_cross_entropy(logits, target);
      out.head_classification += result.loss / n;
      for (std::size_t c = 0; c < logits.size(); ++c) out.d_class_logits[i][c] = result.gradient[c] / n;
    } else {
      std::vector<int> binary(logits.size() - 1, 0);
      if (target > 0) binary[static_cast<std::size_t>(target - 1)] = 1;
      const auto result = sigmoid_asymmetric_focal(
          std::span<const double>(logits).subspan(1), binary, config);
      out.head_classification += result.loss / n;
      for (std::size_t c = 1; c < logits.size(); ++c) {
        out.d_class_logits[i][c] = result.gradient[c - 1] / n;
      }
    }
    if (kind == SampleKind::positive) {
      const double np = static_cast<double>(head_pos);
      out.head_regression += smooth_l1_loss(head.deltas[i], head_targets.regression[i], beta) / np;
      BoxDelta g = smooth_l1_gradient(head.deltas[i], head_targets.regression[i], beta);
      for (int k = 0; k < 4; ++k) out.d_head_deltas[i][k] = lambda * g[k] / np;
    }
  }

  out.total = out.head_classification + lambda * out.head_regression + out.rpn_objectness +
              lambda * out.rpn_regression;
  return out;
}

}  // namespace wildscan
