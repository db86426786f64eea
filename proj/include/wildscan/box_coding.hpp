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

#include <cmath>
#include <vector>

#include "wildscan/box.hpp"

namespace wildscan {

// Offsets of a box relative to a reference (anchor or proposal):
//   t_x = (x - x_a) / w_a,  t_y = (y - y_a) / h_a,
//   t_w = log(w / w_a),     t_h = log(h / h_a)
// on centers and sizes.
struct BoxDelta {
  double t_x = 0.0;
  double t_y = 0.0;
  double t_w = 0.0;
  double t_h = 0.0;

  double& operator[](int i) { return i == 0 ? t_x : i == 1 ? t_y : i == 2 ? t_w : t_h; }
  double operator[](int i) const { return i == 0 ? t_x : i == 1 ? t_y : i == 2 ? t_w : t_h; }
};

// Upper bound applied to t_w / t_h before exponentiation.
inline const double kMaxLogScale = std::log(1000.0 / 16.0);

BoxDelta encode_boxes(const Box& box, const Box& reference);

// Exact inverse of encode_boxes (t_w / t_h above kMaxLogScale are clamped).
Box decode_boxes(const BoxDelta& delta, const Box& reference);

struct DecodedBox {
  Box box;
  // The clipped box had a side shorter than one pixel and was widened to 1.
  bool clamped = false;
};

// Decode, clip to [0, width] x [0, height], then enforce a minimum size of
// one pixel along each axis.
DecodedBox decode_boxes(const BoxDelta& delta, const Box& reference, double image_width,
                        double image_height);

}  // namespace wildscan
