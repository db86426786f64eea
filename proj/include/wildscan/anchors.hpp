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

#include <vector>

#include "wildscan/box.hpp"

namespace wildscan {

struct AnchorGrid {
  int feature_height = 0;
  int feature_width = 0;
  int anchors_per_cell = 0;
  // Index (y * feature_width + x) * anchors_per_cell + a, where
  // a = scale_index * |ratios| + ratio_index.
  std::vector<Box> anchors;
};

// Anchors of scale s and ratio r (= h / w) have area s^2 and are centred at
// ((x + 0.5) * stride, (y + 0.5) * stride).
AnchorGrid generate_anchors(int stride, const std::vector<double>& scales,
                            const std::vector<double>& ratios, int feature_height,
                            int feature_width);

}  // namespace wildscan
