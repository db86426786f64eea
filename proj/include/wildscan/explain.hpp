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
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "wildscan/detector.hpp"
#include "wildscan/image.hpp"
#include "wildscan/nn.hpp"

namespace wildscan {

// Class activation heat map at image resolution, values in [0, 1].
struct CamMap {
  std::string image_id;
  int target_class = 0;
  int width = 0;
  int height = 0;
  std::vector<double> heat;  // row-major, height x width
  int raw_height = 0;        // feature-map shape
  int raw_width = 0;
  std::string normalization = "min_max";
  // The weighted activation map had no positive contrast; heat is all zero.
  bool all_zero = false;
  std::optional<double> target_score;

  double at(int x, int y) const { return heat[static_cast<std::size_t>(y) * width + x]; }
};

// alpha_k = spatial mean of gradients[k]; raw = ReLU(sum_k alpha_k A^k),
// bilinearly upsampled (half-pixel centres) to width x height, then min-max
// normalised. A map without contrast comes back all zero and flagged.
CamMap compose_cam(const nn::FeatureMap& activations, const nn::FeatureMap& gradients, int width,
                   int height);

struct CamTarget {
  std::optional<std::size_t> detection_index;
  std::optional<int> class_id;

  static CamTarget detection(std::size_t index) { return {index, std::nullopt}; }
  static CamTarget for_class(int id) { return {std::nullopt, id}; }
};

// Grad-CAM on the last backbone layer for the target's class logit.
// `logit_scale` multiplies the target score (for invariance checks).
CamMap compute_cam(const Image& image, const Detector& model, const CamTarget& target,
                   const std::string& image_id = "", double logit_scale = 1.0);

// Jet colormap: 0 -> dark blue, 1 -> dark red.
std::array<std::uint8_t, 3> jet_color(double value);

// (1 - alpha) * image + alpha * jet(heat), per channel, rounded to nearest.
Image render_overlay(const Image& image, const CamMap& cam, double alpha);

nlohmann::ordered_json cam_metadata(const CamMap& cam, const std::vector<std::string>& class_names);

}  // namespace wildscan
