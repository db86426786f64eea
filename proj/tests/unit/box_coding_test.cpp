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

#include <gtest/gtest.h>

#include <cmath>
#include <random>

namespace wildscan {
namespace {

TEST(BoxCodingTest, EncodeOfAnchorItselfIsZero) {
  const Box a{10, 20, 74, 52};
  const BoxDelta d = encode_boxes(a, a);
  EXPECT_DOUBLE_EQ(d.t_x, 0.0);
  EXPECT_DOUBLE_EQ(d.t_y, 0.0);
  EXPECT_DOUBLE_EQ(d.t_w, 0.0);
  EXPECT_DOUBLE_EQ(d.t_h, 0.0);
}

TEST(BoxCodingTest, MatchesClosedForm) {
  const Box anchor{0, 0, 20, 10};   // centre (10, 5), size 20 x 10
  const Box box{5, 0, 45, 20};      // centre (25, 10), size 40 x 20
  const BoxDelta d = encode_boxes(box, anchor);
  EXPECT_NEAR(d.t_x, 15.0 / 20.0, 1e-15);
  EXPECT_NEAR(d.t_y, 5.0 / 10.0, 1e-15);
  EXPECT_NEAR(d.t_w, std::log(2.0), 1e-15);
  EXPECT_NEAR(d.t_h, std::log(2.0), 1e-15);
}

TEST(BoxCodingTest, RoundTripOnRandomPairs) {
  std::mt19937_64 rng(5);
  // Size ratios stay below exp(kMaxLogScale), where decoding is exact.
  std::uniform_real_distribution<double> pos(0.0, 500.0), size(8.0, 300.0);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const double ax = pos(rng), ay = pos(rng);
    const Box anchor{ax, ay, ax + size(rng), ay + size(rng)};
    const double bx = pos(rng), by = pos(rng);
    const Box box{bx, by, bx + size(rng), by + size(rng)};
    const Box back = decode_boxes(encode_boxes(box, anchor), anchor);
    worst = std::max({worst, std::abs(back.x_min - box.x_min), std::abs(back.y_min - box.y_min),
                      std::abs(back.x_max - box.x_max), std::abs(back.y_max - box.y_max)});
  }
  EXPECT_LT(worst, 1e-5);
}

TEST(BoxCodingTest, ClippedDecodeStaysInImage) {
  const Box anchor{100, 100, 164, 164};
  const DecodedBox d = decode_boxes({3.0, -4.0, 1.0, 0.5}, anchor, 200, 150);
  EXPECT_GE(d.box.x_min, 0.0);
  EXPECT_GE(d.box.y_min, 0.0);
  EXPECT_LE(d.box.x_max, 200.0);
  EXPECT_LE(d.box.y_max, 150.0);
}

TEST(BoxCodingTest, CollapsedBoxIsWidenedAndFlagged) {
  // Entirely right of the image: clipping collapses the box to zero width.
  const Box anchor{300, 10, 340, 50};
  const DecodedBox d = decode_boxes({0, 0, 0, 0}, anchor, 200, 100);
  EXPECT_TRUE(d.clamped);
  EXPECT_NEAR(d.box.width(), 1.0, 1e-12);
  EXPECT_LE(d.box.x_max, 200.0);
  EXPECT_GE(d.box.x_min, 0.0);
}

TEST(BoxCodingTest, HugeScaleIsClamped) {
  const Box anchor{0, 0, 10, 10};
  const Box b = decode_boxes({0, 0, 50.0, 50.0}, anchor);
  EXPECT_TRUE(std::isfinite(b.x_max));
  EXPECT_NEAR(b.width(), 10.0 * std::exp(kMaxLogScale), 1e-6);
}

}  // namespace
}  // namespace wildscan
