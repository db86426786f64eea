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

#include "wildscan/nms.hpp"

#include <algorithm>
#include <numeric>

namespace wildscan {

std::vector<std::size_t> nms_indices(std::span<const Box> boxes, std::span<const double> scores,
                                     double iou_threshold) {
  std::vector<std::size_t> order(boxes.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  std::vector<std::size_t> kept;
  std::vector<bool> suppressed(boxes.size(), false);
  for (std::size_t i = 0; i < order.size(); ++i) {
    const std::size_t candidate = order[i];
    if (suppressed[candidate]) continue;
    kept.push_back(candidate);
    for (std::size_t j = i + 1; j < order.size(); ++j) {
      const std::size_t other = order[j];
      if (!suppressed[other] && iou(boxes[candidate], boxes[other]) > iou_threshold) {
        suppressed[other] = true;
      }
    }
  }
  return kept;
}

std::vector<Detection> nms(std::span<const Detection> detections, double iou_threshold,
                           bool per_class) {
  std::vector<std::size_t> order(detections.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return detections[a].score > detections[b].score;
  });
  std::vector<Detection> kept;
  for (std::size_t index : order) {
    const Detection& candidate = detections[index];
    const bool overlaps = std::any_of(kept.begin(), kept.end(), [&](const Detection& k) {
      return (!per_class || k.class_id == candidate.class_id) &&
             iou(k.box, candidate.box) > iou_threshold;
    });
    if (!overlaps) kept.push_back(candidate);
  }
  return kept;
}

}  // namespace wildscan
