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

#include "wildscan/box_coding.hpp"

#include <algorithm>

#include "wildscan/common.hpp"

namespace wildscan {
namespace {

// Widens [lo, hi] to at least one unit, staying inside [0, limit].
bool widen_to_unit(double& lo, double& hi, double limit) {
  if (hi - lo >= 1.0) return false;
  if (limit < 1.0) {
    lo = 0.0;
    hi = limit;
    return true;
  }
  const double center = std::clamp(0.5 * (lo + hi), 0.5, limit - 0.5);
  lo = center - 0.5;
  hi = center + 0.5;
  return true;
}

}  // namespace

BoxDelta encode_boxes(const Box& box, const Box& reference) {
  const double wa = reference.width();
  const double ha = reference.height();
  if (!(wa > 0.0) || !(ha > 0.0)) throw Error("encode_boxes: reference must have positive size");
  return BoxDelta{(box.center_x() - reference.center_x()) / wa,
                  (box.center_y() - reference.center_y()) / ha, std::log(box.width() / wa),
                  std::log(box.height() / ha)};
}

Box decode_boxes(const BoxDelta& delta, const Box& reference) {
  const double wa = reference.width();
  const double ha = reference.height();
  if (!(wa > 0.0) || !(ha > 0.0)) throw Error("decode_boxes: reference must have positive size");
  const double cx = reference.center_x() + delta.t_x * wa;
  const double cy = reference.center_y() + delta.t_y * ha;
  const double w = wa * std::exp(std::min(delta.t_w, kMaxLogScale));
  const double h = ha * std::exp(std::min(delta.t_h, kMaxLogScale));
  return Box{cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h};
}

DecodedBox decode_boxes(const BoxDelta& delta, const Box& reference, double image_width,
                        double image_height) {
  DecodedBox out;
  out.box = clip_box(decode_boxes(delta, reference), image_width, image_height);
  const bool clamped_x = widen_to_unit(out.box.x_min, out.box.x_max, image_width);
  const bool clamped_y = widen_to_unit(out.box.y_min, out.box.y_max, image_height);
  out.clamped = clamped_x || clamped_y;
  return out;
}

}  // namespace wildscan
