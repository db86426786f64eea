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

#include "wildscan/explain.hpp"

#include <algorithm>
#include <cmath>

#include "wildscan/common.hpp"

namespace wildscan {
namespace {

// Bilinear resize with half-pixel centres and edge clamping.
std::vector<double> upsample(const std::vector<double>& src, int src_w, int src_h, int dst_w,
                             int dst_h) {
  std::vector<double> out(static_cast<std::size_t>(dst_w) * dst_h);
  const double sx = static_cast<double>(src_w) / dst_w;
  const double sy = static_cast<double>(src_h) / dst_h;
  for (int y = 0; y < dst_h; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, static_cast<double>(src_h - 1));
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, src_h - 1);
    const double wy = fy - y0;
    for (int x = 0; x < dst_w; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, static_cast<double>(src_w - 1));
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, src_w - 1);
      const double wx = fx - x0;
      auto v = [&](int yy, int xx) { return src[static_cast<std::size_t>(yy) * src_w + xx]; };
      out[static_cast<std::size_t>(y) * dst_w + x] =
          (1 - wy) * ((1 - wx) * v(y0, x0) + wx * v(y0, x1)) +
          wy * ((1 - wx) * v(y1, x0) + wx * v(y1, x1));
    }
  }
  return out;
}

}  // namespace

CamMap compose_cam(const nn::FeatureMap& activations, const nn::FeatureMap& gradients, int width,
                   int height) {
  if (activations.channels != gradients.channels || activations.height != gradients.height ||
      activations.width != gradients.width) {
    throw Error("compose_cam: activation and gradient shapes differ");
  }
  if (activations.height < 1 || activations.width < 1 || width < 1 || height < 1) {
    throw Error("compose_cam: empty map");
  }
  const Eigen::VectorXd alpha = gradients.values.rowwise().mean();
  const Eigen::RowVectorXd weighted = alpha.transpose() * activations.values;
  std::vector<double> raw(static_cast<std::size_t>(weighted.size()));
  for (Eigen::Index i = 0; i < weighted.size(); ++i) raw[static_cast<std::size_t>(i)] = std::max(weighted(i), 0.0);

  CamMap cam;
  cam.width = width;
  cam.height = height;
  cam.raw_height = activations.height;
  cam.raw_width = activations.width;
  cam.heat = upsample(raw, activations.width, activations.height, width, height);
  const auto [lo, hi] = std::minmax_element(cam.heat.begin(), cam.heat.end());
  const double min = *lo;
  const double range = *hi - min;
  if (!(range > 0.0) || !std::isfinite(range)) {
    std::fill(cam.heat.begin(), cam.heat.end(), 0.0);
    cam.all_zero = true;
    return cam;
  }
  for (double& v : cam.heat) v = (v - min) / range;
  return cam;
}

CamMap compute_cam(const Image& image, const Detector& model, const CamTarget& target,
                   const std::string& image_id, double logit_scale) {
  if (!(logit_scale > 0.0)) throw Error("compute_cam: logit scale must be positive");
  const GradientCapture capture =
      model.capture_gradients(image, target.detection_index, target.class_id, logit_scale);
  CamMap cam = compose_cam(capture.activations, capture.gradients, image.width, image.height);
  cam.image_id = image_id;
  cam.target_class = capture.target_class;
  cam.target_score = capture.target_score;
  return cam;
}

std::array<std::uint8_t, 3> jet_color(double value) {
  const double v = std::clamp(value, 0.0, 1.0);
  auto channel = [&](double centre) {
    const double c = std::clamp(1.5 - std::abs(4.0 * v - centre), 0.0, 1.0);
    return static_cast<std::uint8_t>(std::lround(c * 255.0));
  };
  return {channel(3.0), channel(2.0), channel(1.0)};
}

Image render_overlay(const Image& image, const CamMap& cam, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw Error("render_overlay: alpha must be in [0, 1]");
  if (cam.width != image.width || cam.height != image.height) {
    throw Error("render_overlay: heat map and image sizes differ");
  }
  Image out(image.width, image.height);
  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < image.width; ++x) {
      const auto colour = jet_color(cam.at(x, y));
      for (int c = 0; c < 3; ++c) {
        const double blended = (1.0 - alpha) * image.at(x, y, c) + alpha * colour[static_cast<std::size_t>(c)];
        out.at(x, y, c) = static_cast<std::uint8_t>(std::clamp(std::lround(blended), 0L, 255L));
      }
    }
  }
  return out;
}

nlohmann::ordered_json cam_metadata(const CamMap& cam, const std::vector<std::string>& class_names) {
  nlohmann::ordered_json j;
  j["image_id"] = cam.image_id;
  j["target_class"] = cam.target_class >= 0 && cam.target_class < static_cast<int>(class_names.size())
                          ? class_names[static_cast<std::size_t>(cam.target_class)]
                          : std::to_string(cam.target_class);
  j["detection_score"] = cam.target_score ? nlohmann::ordered_json(*cam.target_score) : nullptr;
  j["width"] = cam.width;
  j["height"] = cam.height;
  j["raw_shape"] = {cam.raw_height, cam.raw_width};
  j["normalization"] = cam.normalization;
  j["all_zero"] = cam.all_zero;
  return j;
}

}  // namespace wildscan
