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

#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"

namespace wildscan {
namespace {

oracle::Rect to_rect(const Box& b) { return {b.x_min, b.y_min, b.x_max, b.y_max}; }

TEST(IouTest, SelfOverlapIsOne) {
  const Box b{3.5, 2.0, 17.25, 9.0};
  EXPECT_DOUBLE_EQ(iou(b, b), 1.0);
}

TEST(IouTest, DisjointIsZero) {
  EXPECT_DOUBLE_EQ(iou({0, 0, 10, 10}, {20, 20, 30, 30}), 0.0);
  // Touching edges share no area.
  EXPECT_DOUBLE_EQ(iou({0, 0, 10, 10}, {10, 0, 20, 10}), 0.0);
}

TEST(IouTest, HalfShiftedSquares) {
  const Box a{0, 0, 10, 10};
  const Box b{5, 0, 15, 10};
  EXPECT_NEAR(iou(a, b), 50.0 / 150.0, 1e-15);
  EXPECT_NEAR(oracle::rasterized_iou(to_rect(a), to_rect(b), 0.01), 50.0 / 150.0, 1e-3);
}

TEST(IouTest, DegenerateBoxHasZeroOverlap) {
  const Box line{5, 5, 5, 10};
  EXPECT_DOUBLE_EQ(iou(line, line), 0.0);
  EXPECT_DOUBLE_EQ(iou(line, {0, 0, 10, 10}), 0.0);
}

TEST(IouTest, SymmetricAndBoundedOnRandomPairs) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 50.0);
  for (int i = 0; i < 500; ++i) {
    const double x = u(rng), y = u(rng);
    const Box a{x, y, x + 1 + u(rng), y + 1 + u(rng)};
    const double x2 = u(rng), y2 = u(rng);
    const Box b{x2, y2, x2 + 1 + u(rng), y2 + 1 + u(rng)};
    const double v = iou(a, b);
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
    EXPECT_DOUBLE_EQ(v, iou(b, a));
    EXPECT_NEAR(v, oracle::iou(to_rect(a), to_rect(b)), 1e-12);
  }
}

TEST(ClipBoxTest, ClampsToImage) {
  const Box c = clip_box({-4, 3, 130, 140}, 128, 96);
  EXPECT_EQ(c, (Box{0, 3, 128, 96}));
}

TEST(FlipBoxTest, MirrorsAndIsAnInvolution) {
  const Box b{10, 5, 30, 25};
  const Box f = flip_horizontal(b, 100);
  EXPECT_EQ(f, (Box{70, 5, 90, 25}));
  EXPECT_EQ(flip_horizontal(f, 100), b);
}

}  // namespace
}  // namespace wildscan
