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

#include "wildscan/anchors.hpp"

#include <cmath>

#include "wildscan/common.hpp"

namespace wildscan {

AnchorGrid generate_anchors(int stride, const std::vector<double>& scales,
                            const std::vector<double>& ratios, int feature_height,
                            int feature_width) {
  if (feature_height < 1 || feature_width < 1) throw Error("generate_anchors: empty feature map");
  if (scales.empty() || ratios.empty()) throw Error("generate_anchors: no scales or ratios");
  AnchorGrid grid;
  grid.feature_height = feature_height;
  grid.feature_width = feature_width;
  grid.anchors_per_cell = static_cast<int>(scales.size() * ratios.size());

  std::vector<std::pair<double, double>> shapes;  // (w, h)
  for (double scale : scales) {
    for (double ratio : ratios) {
      const double root = std::sqrt(ratio);
      shapes.emplace_back(scale / root, scale * root);
    }
  }
  grid.anchors.reserve(static_cast<std::size_t>(feature_height) * feature_width * shapes.size());
  for (int y = 0; y < feature_height; ++y) {
    for (int x = 0; x < feature_width; ++x) {
      const double cx = (x + 0.5) * stride;
      const double cy = (y + 0.5) * stride;
      for (const auto& [w, h] : shapes) {
        grid.anchors.push_back(Box{cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h});
      }
    }
  }
  return grid;
}

}  // namespace wildscan
