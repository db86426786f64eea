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

#include "wildscan/detector.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <set>

#include "wildscan/anchors.hpp"
#include "wildscan/box_coding.hpp"
#include "wildscan/common.hpp"

namespace wildscan {
namespace {

using nlohmann::json;
using nlohmann::ordered_json;
using nn::FeatureMap;
using nn::Matrix;

constexpr double kPixelMean = 0.5;
constexpr double kPixelStd = 0.25;

FeatureMap to_input(const Image& image) {
  FeatureMap x(3, image.height, image.width);
  const std::size_t pixels = static_cast<std::size_t>(image.width) * image.height;
  for (int c = 0; c < 3; ++c) {
    double* plane = x.values.row(c).data();
    for (std::size_t p = 0; p < pixels; ++p) {
      plane[p] = (image.rgb[p * 3 + static_cast<std::size_t>(c)] / 255.0 - kPixelMean) / kPixelStd;
    }
  }
  return x;
}

std::unique_ptr<nn::Sequential> build_backbone(nn::ParamStore& params, const DetectorConfig& config,
                                               std::mt19937_64& rng, int& out_channels) {
  auto net = std::make_unique<nn::Sequential>();
  if (config.backbone_profile == BackboneProfile::desk_convnet) {
    int channels = 3;
    for (std::size_t s = 0; s < config.backbone_channels.size(); ++s) {
      const std::string name = "backbone.stage" + std::to_string(s + 1);
      net->add(std::make_unique<nn::Conv2d>(params, name, channels, config.backbone_channels[s], 3,
                                            1, 1, rng));
      net->add(std::make_unique<nn::Relu>());
      net->add(std::make_unique<nn::MaxPool2>());
      channels = config.backbone_channels[s];
    }
    out_channels = channels;
    return net;
  }

  // Stem (stride 2), dense blocks separated by 1x1 + average-pool
  // transitions (stride 16 overall), closing ReLU.
  int channels = config.dense_stem_channels;
  net->add(std::make_unique<nn::Conv2d>(params, "backbone.stem", 3, channels, 3, 1, 1, rng));
  net->add(std::make_unique<nn::Relu>());
  net->add(std::make_unique<nn::MaxPool2>());
  for (std::size_t b = 0; b < config.dense_block_layers.size(); ++b) {
    const std::string block = "backbone.block" + std::to_string(b + 1);
    for (int l = 0; l < config.dense_block_layers[b]; ++l) {
      net->add(std::make_unique<nn::DenseLayer>(params, block + ".layer" + std::to_string(l + 1),
                                                channels, config.dense_growth_rate, rng));
      channels += config.dense_growth_rate;
    }
    if (b + 1 < config.dense_block_layers.size()) {
      const int reduced = std::max(1, channels / 2);
      net->add(std::make_unique<nn::Relu>());
      net->add(std::make_unique<nn::Conv2d>(params, "backbone.transition" + std::to_string(b + 1),
                                            channels, reduced, 1, 1, 0, rng));
      net->add(std::make_unique<nn::AvgPool2>());
      channels = reduced;
    }
  }
  net->add(std::make_unique<nn::Relu>());
  out_channels = channels;
  return net;
}

int backbone_stride(const DetectorConfig& config) {
  if (config.backbone_profile == BackboneProfile::desk_convnet) {
    return 1 << config.backbone_channels.size();
  }
  return 16;
}

struct InferenceParams {
  int pre_nms_top_n;
  int post_nms_top_n;
  double rpn_nms_iou;
  double score_threshold;
  double detection_nms_iou;
  int max_detections;

  static InferenceParams from(const DetectorConfig& c) {
    return {c.rpn_pre_nms_top_n, c.rpn_post_nms_top_n, c.rpn_nms_iou,
            c.score_threshold,  c.detection_nms_iou,  c.max_detections};
  }
};

struct RpnState {
  FeatureMap hidden_pre;  // before ReLU
  FeatureMap hidden;
  FeatureMap objectness;  // A x HW
  FeatureMap deltas;      // 4A x HW
  nn::LayerCache conv_cache;
  nn::LayerCache objectness_cache;
  nn::LayerCache delta_cache;
};

struct HeadState {
  nn::RoiAlign::Plan plan;
  Matrix pooled;      // C*bins x R
  Matrix hidden_pre;  // hidden x R
  Matrix hidden;
  Matrix logits;  // num_classes x R
  Matrix deltas;  // 4*num_classes x R
};

struct ScoredDetection {
  Detection detection;
  std::size_t roi = 0;
};

}  // namespace

// ---------------------------------------------------------------------------
// enums and config

std::string_view to_string(BackboneProfile profile) {
  return profile == BackboneProfile::desk_convnet ? "desk_convnet" : "densenet121_style";
}

BackboneProfile parse_backbone_profile(std::string_view text) {
  if (text == "desk_convnet") return BackboneProfile::desk_convnet;
  if (text == "densenet121_style") return BackboneProfile::densenet121_style;
  throw ValidationError("detector.backbone_profile", std::nullopt,
                        "unknown profile '" + std::string(text) + "'");
}

std::string_view to_string(ScoreActivation activation) {
  return activation == ScoreActivation::softmax ? "softmax" : "sigmoid";
}

ScoreActivation parse_score_activation(std::string_view text) {
  if (text == "softmax") return ScoreActivation::softmax;
  if (text == "sigmoid") return ScoreActivation::sigmoid;
  throw ValidationError("detector.score_activation", std::nullopt,
                        "unknown activation '" + std::string(text) + "'");
}

ScoreActivation activation_for(ClassificationKind kind) {
  return kind == ClassificationKind::cross_entropy ? ScoreActivation::softmax
                                                   : ScoreActivation::sigmoid;
}

void DetectorConfig::validate() const {
  auto fail = [](const std::string& field, const std::string& message) {
    throw ValidationError("detector." + field, std::nullopt, message);
  };
  auto unit_interval = [&](double value, const char* field) {
    if (!(value > 0.0 && value < 1.0)) fail(field, "must be in (0, 1)");
  };
  if (anchor_scales.empty()) fail("anchor_scales", "must not be empty");
  if (anchor_ratios.empty()) fail("anchor_ratios", "must not be empty");
  for (double s : anchor_scales)
    if (!(s > 0)) fail("anchor_scales", "must be positive");
  for (double r : anchor_ratios)
    if (!(r > 0)) fail("anchor_ratios", "must be positive");
  if (rpn_pre_nms_top_n < 1) fail("rpn_pre_nms_top_n", "must be >= 1");
  if (rpn_post_nms_top_n < 1) fail("rpn_post_nms_top_n", "must be >= 1");
  unit_interval(rpn_nms_iou, "rpn_nms_iou");
  unit_interval(score_threshold, "score_threshold");
  unit_interval(detection_nms_iou, "detection_nms_iou");
  unit_interval(rpn_positive_iou, "rpn_positive_iou");
  unit_interval(rpn_negative_iou, "rpn_negative_iou");
  unit_interval(roi_positive_iou, "roi_positive_iou");
  unit_interval(roi_negative_iou, "roi_negative_iou");
  unit_interval(rpn_positive_fraction, "rpn_positive_fraction");
  unit_interval(roi_positive_fraction, "roi_positive_fraction");
  if (max_detections < 1) fail("max_detections", "must be >= 1");
  if (roi_output_size[0] < 1 || roi_output_size[1] < 1) fail("roi_output_size", "must be >= 1");
  if (num_classes < 2) fail("num_classes", "needs background plus at least one class");
  if (static_cast<int>(class_names.size()) + 1 != num_classes) {
    fail("class_names", "expected num_classes - 1 = " + std::to_string(num_classes - 1) +
                            " names, got " + std::to_string(class_names.size()));
  }
  if (std::set<std::string>(class_names.begin(), class_names.end()).size() != class_names.size()) {
    fail("class_names", "duplicate class name");
  }
  if (backbone_profile == BackboneProfile::desk_convnet) {
    if (backbone_channels.empty()) fail("backbone_channels", "must not be empty");
    for (int c : backbone_channels)
      if (c < 1) fail("backbone_channels", "must be positive");
  } else {
    if (dense_block_layers.size() != 4) fail("dense_block_layers", "expected four blocks");
    if (dense_growth_rate < 1) fail("dense_growth_rate", "must be >= 1");
    if (dense_stem_channels < 1) fail("dense_stem_channels", "must be >= 1");
  }
  if (feature_stride != backbone_stride(*this)) {
    fail("feature_stride", "backbone produces stride " + std::to_string(backbone_stride(*this)));
  }
  if (rpn_channels < 1) fail("rpn_channels", "must be >= 1");
  if (head_hidden < 1) fail("head_hidden", "must be >= 1");
  if (rpn_batch_size < 1) fail("rpn_batch_size", "must be >= 1");
  if (roi_batch_size < 1) fail("roi_batch_size", "must be >= 1");
}

ordered_json detector_config_to_json(const DetectorConfig& c) {
  ordered_json j;
  j["backbone_profile"] = to_string(c.backbone_profile);
  j["feature_stride"] = c.feature_stride;
  j["anchor_scales"] = c.anchor_scales;
  j["anchor_ratios"] = c.anchor_ratios;
  j["rpn_pre_nms_top_n"] = c.rpn_pre_nms_top_n;
  j["rpn_post_nms_top_n"] = c.rpn_post_nms_top_n;
  j["rpn_nms_iou"] = c.rpn_nms_iou;
  j["roi_output_size"] = c.roi_output_size;
  j["num_classes"] = c.num_classes;
  j["score_threshold"] = c.score_threshold;
  j["detection_nms_iou"] = c.detection_nms_iou;
  j["max_detections"] = c.max_detections;
  j["class_names"] = c.class_names;
  j["score_activation"] = to_string(c.score_activation);
  j["backbone_channels"] = c.backbone_channels;
  j["dense_growth_rate"] = c.dense_growth_rate;
  j["dense_block_layers"] = c.dense_block_layers;
  j["dense_stem_channels"] = c.dense_stem_channels;
  j["rpn_channels"] = c.rpn_channels;
  j["head_hidden"] = c.head_hidden;
  j["rpn_batch_size"] = c.rpn_batch_size;
  j["rpn_positive_fraction"] = c.rpn_positive_fraction;
  j["rpn_positive_iou"] = c.rpn_positive_iou;
  j["rpn_negative_iou"] = c.rpn_negative_iou;
  j["roi_batch_size"] = c.roi_batch_size;
  j["roi_positive_fraction"] = c.roi_positive_fraction;
  j["roi_positive_iou"] = c.roi_positive_iou;
  j["roi_negative_iou"] = c.roi_negative_iou;
  return j;
}

DetectorConfig detector_config_from_json(const json& doc) {
  if (!doc.is_object()) throw ValidationError("detector", std::nullopt, "expected an object");
  DetectorConfig c;
  const ordered_json defaults = detector_config_to_json(c);
  for (const auto& [key, value] : doc.items()) {
    if (!defaults.contains(key)) {
      throw ValidationError("detector." + key, std::nullopt, "unknown field");
    }
  }
  auto read = [&](const char* key, auto& target) {
    auto it = doc.find(key);
    if (it == doc.end()) return;
    try {
      it->get_to(target);
    } catch (const json::exception& e) {
      throw ValidationError(std::string("detector.") + key, std::nullopt, e.what());
    }
  };
  std::string text;
  if (doc.contains("backbone_profile")) {
    read("backbone_profile", text);
    c.backbone_profile = parse_backbone_profile(text);
  }
  if (doc.contains("score_activation")) {
    read("score_activation", text);
    c.score_activation = parse_score_activation(text);
  }
  read("feature_stride", c.feature_stride);
  read("anchor_scales", c.anchor_scales);
  read("anchor_ratios", c.anchor_ratios);
  read("rpn_pre_nms_top_n", c.rpn_pre_nms_top_n);
  read("rpn_post_nms_top_n", c.rpn_post_nms_top_n);
  read("rpn_nms_iou", c.rpn_nms_iou);
  read("roi_output_size", c.roi_output_size);
  read("class_names", c.class_names);
  if (doc.contains("num_classes")) {
    read("num_classes", c.num_classes);
  } else {
    c.num_classes = static_cast<int>(c.class_names.size()) + 1;
  }
  read("score_threshold", c.score_threshold);
  read("detection_nms_iou", c.detection_nms_iou);
  read("max_detections", c.max_detections);
  read("backbone_channels", c.backbone_channels);
  read("dense_growth_rate", c.dense_growth_rate);
  read("dense_block_layers", c.dense_block_layers);
  read("dense_stem_channels", c.dense_stem_channels);
  read("rpn_channels", c.rpn_channels);
  read("head_hidden", c.head_hidden);
  read("rpn_batch_size", c.rpn_batch_size);
  read("rpn_positive_fraction", c.rpn_positive_fraction);
  read("rpn_positive_iou", c.rpn_positive_iou);
  read("rpn_negative_iou", c.rpn_negative_iou);
  read("roi_batch_size", c.roi_batch_size);
  read("roi_positive_fraction", c.roi_positive_fraction);
  read("roi_positive_iou", c.roi_positive_iou);
  read("roi_negative_iou", c.roi_negative_iou);
  c.validate();
  return c;
}

// ---------------------------------------------------------------------------
// Detector

struct Detector::Impl {
  const DetectorConfig& config;
  int feature_channels = 0;  // set while the backbone is built
  std::unique_ptr<nn::Sequential> backbone;
  nn::Conv2d rpn_conv;
  nn::Conv2d rpn_objectness;
  nn::Conv2d rpn_deltas;
  nn::Linear fc;
  nn::Linear classifier;
  nn::Linear box_regressor;
  nn::RoiAlign roi_align;
  mutable std::atomic<std::uint64_t> clamp_events{0};

  static std::unique_ptr<nn::Sequential> make_backbone(nn::ParamStore& params,
                                                       const DetectorConfig& config,
                                                       std::mt19937_64& rng, int& channels) {
    return build_backbone(params, config, rng, channels);
  }

  Impl(const DetectorConfig& cfg, nn::ParamStore& params, std::mt19937_64& rng)
      : config(cfg),
        backbone(make_backbone(params, cfg, rng, feature_channels)),
        rpn_conv(params, "rpn.conv", feature_channels, cfg.rpn_channels, 3, 1, 1, rng, 0.01),
        rpn_objectness(params, "rpn.objectness", cfg.rpn_channels, cfg.anchors_per_cell(), 1, 1, 0,
                       rng, 0.01),
        rpn_deltas(params, "rpn.deltas", cfg.rpn_channels, 4 * cfg.anchors_per_cell(), 1, 1, 0, rng,
                   0.001),
        fc(params, "head.fc", feature_channels * cfg.roi_output_size[0] * cfg.roi_output_size[1],
           cfg.head_hidden, rng),
        classifier(params, "head.classifier", cfg.head_hidden, cfg.num_classes, rng, 0.1),
        box_regressor(params, "head.box_regressor", cfg.head_hidden, 4 * cfg.num_classes, rng,
                      0.001),
        roi_align(cfg.roi_output_size[0], cfg.roi_output_size[1], 1.0 / cfg.feature_stride) {}

  void check_image(const Image& image) const {
    if (image.width < config.feature_stride || image.height < config.feature_stride) {
      throw Error("image " + std::to_string(image.width) + "x" + std::to_string(image.height) +
                  " is smaller than one feature cell (" + std::to_string(config.feature_stride) +
                  " px)");
    }
  }

  RpnState run_rpn(const nn::ParamStore& params, const FeatureMap& features, bool keep) const {
    RpnState s;
    s.hidden_pre = rpn_conv.forward(params, features, keep ? &s.conv_cache : nullptr);
    s.hidden = s.hidden_pre;
    s.hidden.values = s.hidden.values.cwiseMax(0.0);
    s.objectness = rpn_objectness.forward(params, s.hidden, keep ? &s.objectness_cache : nullptr);
    s.deltas = rpn_deltas.forward(params, s.hidden, keep ? &s.delta_cache : nullptr);
    return s;
  }

  static double anchor_logit(const RpnState& s, std::size_t index, int per_cell) {
    const auto cell = static_cast<Eigen::Index>(index / static_cast<std::size_t>(per_cell));
    const auto a = static_cast<Eigen::Index>(index % static_cast<std::size_t>(per_cell));
    return s.objectness.values(a, cell);
  }

  static BoxDelta anchor_delta(const RpnState& s, std::size_t index, int per_cell) {
    const auto cell = static_cast<Eigen::Index>(index / static_cast<std::size_t>(per_cell));
    const auto a = static_cast<Eigen::Index>(index % static_cast<std::size_t>(per_cell));
    return BoxDelta{s.deltas.values(4 * a, cell), s.deltas.values(4 * a + 1, cell),
                    s.deltas.values(4 * a + 2, cell), s.deltas.values(4 * a + 3, cell)};
  }

  std::vector<Box> propose(const AnchorGrid& grid, const RpnState& s, const Image& image,
                           const InferenceParams& p) const {
    const int per_cell = grid.anchors_per_cell;
    const std::size_t n = grid.anchors.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> logits(n);
    for (std::size_t i = 0; i < n; ++i) logits[i] = anchor_logit(s, i, per_cell);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return logits[a] > logits[b]; });
    order.resize(std::min<std::size_t>(n, static_cast<std::size_t>(p.pre_nms_top_n)));

    std::vector<Box> boxes;
    std::vector<double> scores;
    boxes.reserve(order.size());
    scores.reserve(order.size());
    for (std::size_t index : order) {
      boxes.push_back(decode_boxes(anchor_delta(s, index, per_cell), grid.anchors[index],
                                   image.width, image.height)
                          .box);
      scores.push_back(logits[index]);
    }
    auto kept = nms_indices(boxes, scores, p.rpn_nms_iou);
    kept.resize(std::min<std::size_t>(kept.size(), static_cast<std::size_t>(p.post_nms_top_n)));
    std::vector<Box> proposals;
    proposals.reserve(kept.size());
    for (std::size_t k : kept) proposals.push_back(boxes[k]);
    return proposals;
  }

  HeadState run_head(const nn::ParamStore& params, const FeatureMap& features,
                     std::span<const Box> rois) const {
    HeadState h;
    h.plan = roi_align.plan(features, rois);
    h.pooled = roi_align.forward(features, h.plan);
    h.hidden_pre = fc.forward(params, h.pooled);
    h.hidden = h.hidden_pre.cwiseMax(0.0);
    h.logits = classifier.forward(params, h.hidden);
    h.deltas = box_regressor.forward(params, h.hidden);
    return h;
  }

  std::vector<double> class_scores(const HeadState& h, Eigen::Index roi) const {
    const int k = config.num_classes;
    std::vector<double> logits(static_cast<std::size_t>(k));
    for (int c = 0; c < k; ++c) logits[static_cast<std::size_t>(c)] = h.logits(c, roi);
    if (config.score_activation == ScoreActivation::softmax) return softmax(logits);
    std::vector<double> scores(logits.size());
    for (std::size_t c = 0; c < logits.size(); ++c) scores[c] = sigmoid(logits[c]);
    scores[0] = 0.0;
    return scores;
  }

  std::vector<ScoredDetection> postprocess(const HeadState& h, std::span<const Box> rois,
                                           const Image& image, const InferenceParams& p) const {
    std::vector<Detection> candidates;
    std::vector<std::size_t> sources;
    for (std::size_t r = 0; r < rois.size(); ++r) {
      const auto roi = static_cast<Eigen::Index>(r);
      const auto scores = class_scores(h, roi);
      for (int c = 1; c < config.num_classes; ++c) {
        const double score = scores[static_cast<std::size_t>(c)];
        if (score < p.score_threshold) continue;
        const BoxDelta delta{h.deltas(4 * c, roi), h.deltas(4 * c + 1, roi),
                             h.deltas(4 * c + 2, roi), h.deltas(4 * c + 3, roi)};
        const DecodedBox decoded = decode_boxes(delta, rois[r], image.width, image.height);
        if (decoded.clamped) clamp_events.fetch_add(1, std::memory_order_relaxed);
        candidates.push_back(Detection{decoded.box, c - 1, std::clamp(score, 0.0, 1.0)});
        sources.push_back(r);
      }
    }
    // per-class NMS keeping provenance
    std::vector<std::size_t> order(candidates.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return candidates[a].score > candidates[b].score;
    });
    std::vector<ScoredDetection> kept;
    for (std::size_t index : order) {
      const Detection& candidate = candidates[index];
      const bool overlaps = std::any_of(kept.begin(), kept.end(), [&](const ScoredDetection& k) {
        return k.detection.class_id == candidate.class_id &&
               iou(k.detection.box, candidate.box) > p.detection_nms_iou;
      });
      if (overlaps) continue;
      kept.push_back({candidate, sources[index]});
      if (static_cast<int>(kept.size()) >= p.max_detections) break;
    }
    return kept;
  }

  struct InferencePass {
    FeatureMap features;
    std::vector<Box> proposals;
    HeadState head;
    std::vector<ScoredDetection> detections;
  };

  InferencePass infer(const nn::ParamStore& params, const Image& image,
                      const InferenceParams& p) const {
    check_image(image);
    InferencePass pass;
    pass.features = backbone->forward(params, to_input(image), nullptr);
    const RpnState rpn = run_rpn(params, pass.features, false);
    const AnchorGrid grid =
        generate_anchors(config.feature_stride, config.anchor_scales, config.anchor_ratios,
                         pass.features.height, pass.features.width);
    pass.proposals = propose(grid, rpn, image, p);
    pass.head = run_head(params, pass.features, pass.proposals);
    pass.detections = postprocess(pass.head, pass.proposals, image, p);
    return pass;
  }
};

Detector::Detector(DetectorConfig config, std::uint64_t init_seed) : config_(std::move(config)) {
  config_.validate();
  std::mt19937_64 rng(init_seed);
  impl_ = std::make_unique<Impl>(config_, params_, rng);
}

Detector::Detector(const Detector& other) : config_(other.config_) {
  std::mt19937_64 rng(0);
  impl_ = std::make_unique<Impl>(config_, params_, rng);
  params_ = other.params_;
}

Detector& Detector::operator=(const Detector& other) {
  if (this != &other) {
    Detector copy(other);
    *this = std::move(copy);
  }
  return *this;
}

// Impl holds a reference to config_, so moves rebuild it around the moved
// configuration and keep the parameter values.
Detector::Detector(Detector&& other) noexcept
    : config_(std::move(other.config_)), params_(std::move(other.params_)) {
  nn::ParamStore scratch;
  std::mt19937_64 rng(0);
  impl_ = std::make_unique<Impl>(config_, scratch, rng);
  other.impl_.reset();
}

Detector& Detector::operator=(Detector&& other) noexcept {
  if (this != &other) {
    config_ = std::move(other.config_);
    params_ = std::move(other.params_);
    nn::ParamStore scratch;
    std::mt19937_64 rng(0);
    impl_ = std::make_unique<Impl>(config_, scratch, rng);
    other.impl_.reset();
  }
  return *this;
}

Detector::~Detector() = default;

std::uint64_t Detector::clamp_events() const { return impl_->clamp_events.load(); }

std::vector<Detection> Detector::detect(const Image& image) const {
  auto pass = impl_->infer(params_, image, InferenceParams::from(config_));
  std::vector<Detection> out;
  out.reserve(pass.detections.size());
  for (const auto& d : pass.detections) out.push_back(d.detection);
  return out;
}

std::vector<Detection> detect(const Image& image, const Detector& model,
                              const DetectorConfig& config) {
  const DetectorConfig& own = model.config();
  if (config.num_classes != own.num_classes) {
    throw Error("detect: config has " + std::to_string(config.num_classes) +
                " classes, model has " + std::to_string(own.num_classes));
  }
  if (config.feature_stride != own.feature_stride) {
    throw Error("detect: config stride " + std::to_string(config.feature_stride) +
                " does not match model stride " + std::to_string(own.feature_stride));
  }
  if (config.anchor_scales != own.anchor_scales || config.anchor_ratios != own.anchor_ratios) {
    throw Error("detect: anchor configuration does not match the model");
  }
  config.validate();
  DetectorConfig merged = own;
  merged.rpn_pre_nms_top_n = config.rpn_pre_nms_top_n;
  merged.rpn_post_nms_top_n = config.rpn_post_nms_top_n;
  merged.rpn_nms_iou = config.rpn_nms_iou;
  merged.score_threshold = config.score_threshold;
  merged.detection_nms_iou = config.detection_nms_iou;
  merged.max_detections = config.max_detections;
  Detector runner(std::move(merged));
  runner.params() = model.params();
  return runner.detect(image);
}

LossBreakdown Detector::train_step(const TrainingSample& sample, const LossConfig& loss,
                                   std::mt19937_64& rng, nn::GradStore& grads) const {
  const Impl& m = *impl_;
  const DetectorConfig& c = config_;
  m.check_image(sample.image);
  for (const auto& gt : sample.ground_truths) {
    if (gt.class_index < 1 || gt.class_index >= c.num_classes) {
      throw Error("train_step: ground-truth class index out of range");
    }
  }

  nn::LayerCache backbone_cache;
  const FeatureMap features = m.backbone->forward(params_, to_input(sample.image), &backbone_cache);
  RpnState rpn = m.run_rpn(params_, features, true);
  const AnchorGrid grid = generate_anchors(c.feature_stride, c.anchor_scales, c.anchor_ratios,
                                           features.height, features.width);
  const int per_cell = grid.anchors_per_cell;

  auto sample_indices = [&](const TrainingTargets& targets, int batch, double fraction) {
    std::vector<std::size_t> positives, negatives;
    for (std::size_t i = 0; i < targets.size(); ++i) {
      if (targets.kind[i] == SampleKind::positive) positives.push_back(i);
      if (targets.kind[i] == SampleKind::negative) negatives.push_back(i);
    }
    auto shuffle = [&](std::vector<std::size_t>& v) {
      for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng() % i]);
    };
    shuffle(positives);
    shuffle(negatives);
    const std::size_t max_pos = static_cast<std::size_t>(std::floor(batch * fraction));
    positives.resize(std::min(positives.size(), max_pos));
    const std::size_t max_neg = static_cast<std::size_t>(batch) - positives.size();
    negatives.resize(std::min(negatives.size(), max_neg));
    std::vector<std::size_t> chosen = positives;
    chosen.insert(chosen.end(), negatives.begin(), negatives.end());
    std::sort(chosen.begin(), chosen.end());
    return chosen;
  };
  auto subset = [](const TrainingTargets& all, const std::vector<std::size_t>& idx) {
    TrainingTargets t;
    for (std::size_t i : idx) {
      t.kind.push_back(all.kind[i]);
      t.class_target.push_back(all.class_target[i]);
      t.matched_ground_truth.push_back(all.matched_ground_truth[i]);
      t.regression.push_back(all.regression[i]);
    }
    return t;
  };

  // RPN targets
  const TrainingTargets anchor_targets = assign_targets(
      grid.anchors, sample.ground_truths, {c.rpn_positive_iou, c.rpn_negative_iou, true});
  const auto anchor_sample = sample_indices(anchor_targets, c.rpn_batch_size, c.rpn_positive_fraction);
  RpnOutputs rpn_out;
  for (std::size_t i : anchor_sample) {
    rpn_out.objectness_logits.push_back(Impl::anchor_logit(rpn, i, per_cell));
    rpn_out.deltas.push_back(Impl::anchor_delta(rpn, i, per_cell));
  }
  const TrainingTargets rpn_targets = subset(anchor_targets, anchor_sample);

  // Proposals (no gradient) plus ground truth boxes.
  std::vector<Box> proposals = sample.proposals
                                   ? *sample.proposals
                                   : m.propose(grid, rpn, sample.image, InferenceParams::from(c));
  for (const auto& gt : sample.ground_truths) proposals.push_back(gt.box);
  const TrainingTargets proposal_targets = assign_targets(
      proposals, sample.ground_truths, {c.roi_positive_iou, c.roi_negative_iou, false});
  const auto roi_sample = sample_indices(proposal_targets, c.roi_batch_size, c.roi_positive_fraction);
  std::vector<Box> rois;
  for (std::size_t i : roi_sample) rois.push_back(proposals[i]);
  const TrainingTargets head_targets = subset(proposal_targets, roi_sample);

  HeadState head = m.run_head(params_, features, rois);
  HeadOutputs head_out;
  for (std::size_t r = 0; r < rois.size(); ++r) {
    const auto col = static_cast<Eigen::Index>(r);
    std::vector<double> logits(static_cast<std::size_t>(c.num_classes));
    for (int k = 0; k < c.num_classes; ++k) logits[static_cast<std::size_t>(k)] = head.logits(k, col);
    head_out.class_logits.push_back(std::move(logits));
    const int target = head_targets.class_target[r];
    head_out.deltas.push_back(BoxDelta{head.deltas(4 * target, col), head.deltas(4 * target + 1, col),
                                       head.deltas(4 * target + 2, col),
                                       head.deltas(4 * target + 3, col)});
  }

  LossBreakdown result = multitask_loss(rpn_out, head_out, rpn_targets, head_targets, loss);
  const std::pair<const char*, double> terms[] = {
      {"head_classification", result.head_classification},
      {"head_regression", result.head_regression},
      {"rpn_objectness", result.rpn_objectness},
      {"rpn_regression", result.rpn_regression}};
  for (const auto& [name, value] : terms) {
    if (!std::isfinite(value)) throw NumericError(std::string("non-finite loss term ") + name);
  }

  // Head backward.
  const auto rois_n = static_cast<Eigen::Index>(rois.size());
  Matrix d_logits = Matrix::Zero(c.num_classes, rois_n);
  Matrix d_deltas = Matrix::Zero(4 * c.num_classes, rois_n);
  for (Eigen::Index r = 0; r < rois_n; ++r) {
    const auto& g = result.d_class_logits[static_cast<std::size_t>(r)];
    for (int k = 0; k < c.num_classes; ++k) d_logits(k, r) = g[static_cast<std::size_t>(k)];
    const int target = head_targets.class_target[static_cast<std::size_t>(r)];
    for (int k = 0; k < 4; ++k) d_deltas(4 * target + k, r) = result.d_head_deltas[static_cast<std::size_t>(r)][k];
  }
  Matrix d_hidden = m.classifier.backward(params_, head.hidden, d_logits, &grads);
  d_hidden += m.box_regressor.backward(params_, head.hidden, d_deltas, &grads);
  d_hidden = (head.hidden_pre.array() > 0.0).select(d_hidden, 0.0);
  const Matrix d_pooled = m.fc.backward(params_, head.pooled, d_hidden, &grads);
  FeatureMap d_features = m.roi_align.backward(head.plan, d_pooled);

  // RPN backward.
  FeatureMap d_objectness(rpn.objectness.channels, rpn.objectness.height, rpn.objectness.width);
  FeatureMap d_rpn_deltas(rpn.deltas.channels, rpn.deltas.height, rpn.deltas.width);
  for (std::size_t s = 0; s < anchor_sample.size(); ++s) {
    const std::size_t index = anchor_sample[s];
    const auto cell = static_cast<Eigen::Index>(index / static_cast<std::size_t>(per_cell));
    const auto a = static_cast<Eigen::Index>(index % static_cast<std::size_t>(per_cell));
    d_objectness.values(a, cell) = result.d_objectness_logits[s];
    for (int k = 0; k < 4; ++k) d_rpn_deltas.values(4 * a + k, cell) = result.d_rpn_deltas[s][k];
  }
  FeatureMap d_hidden_rpn =
      m.rpn_objectness.backward(params_, rpn.objectness_cache, d_objectness, &grads, true);
  d_hidden_rpn.values +=
      m.rpn_deltas.backward(params_, rpn.delta_cache, d_rpn_deltas, &grads, true).values;
  d_hidden_rpn.values = (rpn.hidden_pre.values.array() > 0.0).select(d_hidden_rpn.values, 0.0);
  d_features.values += m.rpn_conv.backward(params_, rpn.conv_cache, d_hidden_rpn, &grads, true).values;

  m.backbone->backward(params_, backbone_cache, d_features, &grads, false);

  result.d_objectness_logits.clear();
  result.d_rpn_deltas.clear();
  result.d_class_logits.clear();
  result.d_head_deltas.clear();
  return result;
}

GradientCapture Detector::capture_gradients(const Image& image,
                                            std::optional<std::size_t> detection_index,
                                            std::optional<int> class_id,
                                            double logit_scale) const {
  if (detection_index.has_value() == class_id.has_value()) {
    throw Error("capture_gradients: give exactly one of detection index or class id");
  }
  const Impl& m = *impl_;
  auto pass = m.infer(params_, image, InferenceParams::from(config_));

  GradientCapture capture;
  for (const auto& d : pass.detections) capture.detections.push_back(d.detection);

  std::size_t roi = 0;
  if (detection_index) {
    if (*detection_index >= pass.detections.size()) {
      throw Error("detection index " + std::to_string(*detection_index) + " out of range (" +
                  std::to_string(pass.detections.size()) + " detections)");
    }
    const auto& target = pass.detections[*detection_index];
    roi = target.roi;
    capture.target_class = target.detection.class_id;
    capture.target_score = target.detection.score;
  } else {
    if (*class_id < 0 || *class_id >= config_.num_classes - 1) {
      throw Error("class id " + std::to_string(*class_id) + " out of range");
    }
    capture.target_class = *class_id;
    auto it = std::find_if(pass.detections.begin(), pass.detections.end(),
                           [&](const ScoredDetection& d) { return d.detection.class_id == *class_id; });
    if (it != pass.detections.end()) {
      roi = it->roi;
      capture.target_score = it->detection.score;
    } else if (!pass.proposals.empty()) {
      Eigen::Index best = 0;
      pass.head.logits.row(*class_id + 1).maxCoeff(&best);
      roi = static_cast<std::size_t>(best);
    } else {
      throw Error("capture_gradients: no proposals");
    }
  }

  const std::vector<Box> single = {pass.proposals.at(roi)};
  HeadState head = m.run_head(params_, pass.features, single);
  const int row = capture.target_class + 1;
  capture.target_logit = logit_scale * head.logits(row, 0);
  Matrix d_logits = Matrix::Zero(config_.num_classes, 1);
  d_logits(row, 0) = logit_scale;
  Matrix d_hidden = m.classifier.backward(params_, head.hidden, d_logits, nullptr);
  d_hidden = (head.hidden_pre.array() > 0.0).select(d_hidden, 0.0);
  const Matrix d_pooled = m.fc.backward(params_, head.pooled, d_hidden, nullptr);
  capture.gradients = m.roi_align.backward(head.plan, d_pooled);
  capture.activations = std::move(pass.features);
  return capture;
}

}  // namespace wildscan
