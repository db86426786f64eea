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

#include "wildscan/box.hpp"

namespace wildscan {

double iou(const Box& a, const Box& b) {
  const double area_a = a.area();
  const double area_b = b.area();
  if (area_a <= 0.0 || area_b <= 0.0) return 0.0;
  const double iw = std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min);
  const double ih = std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min);
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  return inter / (area_a + area_b - inter);
}

Box clip_box(const Box& box, double image_width, double image_height) {
  return Box{std::clamp(box.x_min, 0.0, image_width), std::clamp(box.y_min, 0.0, image_height),
             std::clamp(box.x_max, 0.0, image_width), std::clamp(box.y_max, 0.0, image_height)};
}

Box flip_horizontal(const Box& box, double image_width) {
  return Box{image_width - box.x_max, box.y_min, image_width - box.x_min, box.y_max};
}

}  // namespace wildscan
