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

#include <cstddef>
#include <span>
#include <vector>

#include "wildscan/box.hpp"

namespace wildscan {

// A scored, classed box. class_id indexes the model's foreground class list,
// so background is not representable.
struct Detection {
  Box box;
  int class_id = 0;
  double score = 0.0;

  friend bool operator==(const Detection&, const Detection&) = default;
};

// Greedy suppression over one set of boxes: visit in descending score (ties
// by lower index) and drop any box whose IoU with an already kept box
// exceeds the threshold. Returns kept indices in visiting order.
std::vector<std::size_t> nms_indices(std::span<const Box> boxes, std::span<const double> scores,
                                     double iou_threshold);

// Output sorted by descending score. With per_class, boxes of different
// classes never suppress each other.
std::vector<Detection> nms(std::span<const Detection> detections, double iou_threshold,
                           bool per_class);

}  // namespace wildscan
