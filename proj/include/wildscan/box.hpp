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

#include <algorithm>

namespace wildscan {

// Axis-aligned box in continuous pixel coordinates. Area is
// (x_max - x_min) * (y_max - y_min); no +1 pixel convention.
struct Box {
  double x_min = 0.0;
  double y_min = 0.0;
  double x_max = 0.0;
  double y_max = 0.0;

  double width() const { return x_max - x_min; }
  double height() const { return y_max - y_min; }
  double area() const {
    return (x_max > x_min && y_max > y_min) ? width() * height() : 0.0;
  }
  double center_x() const { return 0.5 * (x_min + x_max); }
  double center_y() const { return 0.5 * (y_min + y_max); }
  bool valid() const { return x_min < x_max && y_min < y_max; }

  friend bool operator==(const Box&, const Box&) = default;
};

// Intersection over union. A degenerate (zero-area) box has IoU 0 against
// every box, itself included.
double iou(const Box& a, const Box& b);

Box clip_box(const Box& box, double image_width, double image_height);

Box flip_horizontal(const Box& box, double image_width);

}  // namespace wildscan
