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

#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "wildscan/losses.hpp"

namespace wildscan {
namespace {

oracle::Rect rect(const Box& b) { return {b.x_min, b.y_min, b.x_max, b.y_max}; }

SampleKind expected_kind(oracle::Label l) {
  return l == oracle::Label::positive   ? SampleKind::positive
         : l == oracle::Label::negative ? SampleKind::negative
                                        : SampleKind::ignore;
}

TEST(AssignTargetsTest, IdenticalAnchorIsPositiveWithZeroTarget) {
  const std::vector<Box> refs{{10, 10, 50, 50}, {100, 100, 120, 120}};
  const std::vector<GroundTruth> gts{{{10, 10, 50, 50}, 2}};
  const auto t = assign_targets(refs, gts, {});
  EXPECT_EQ(t.kind[0], SampleKind::positive);
  EXPECT_EQ(t.class_target[0], 2);
  EXPECT_DOUBLE_EQ(t.regression[0].t_x, 0.0);
  EXPECT_DOUBLE_EQ(t.regression[0].t_w, 0.0);
  EXPECT_EQ(t.kind[1], SampleKind::negative);
}

TEST(AssignTargetsTest, NoGroundTruthMakesAllNegative) {
  const std::vector<Box> refs{{0, 0, 5, 5}, {1, 1, 9, 9}, {3, 3, 4, 4}};
  const auto t = assign_targets(refs, {}, {});
  for (auto k : t.kind) EXPECT_EQ(k, SampleKind::negative);
  EXPECT_EQ(t.count(SampleKind::positive), 0u);
}

TEST(AssignTargetsTest, SixAnchorsTwoGroundTruthsMatchOracle) {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> pos(0.0, 30.0), size(4.0, 25.0);
  auto random_box = [&] {
    const double x = pos(rng), y = pos(rng);
    return Box{x, y, x + size(rng), y + size(rng)};
  };
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<Box> refs;
    std::vector<oracle::Rect> ref_rects, gt_rects;
    for (int i = 0; i < 6; ++i) {
      refs.push_back(random_box());
      ref_rects.push_back(rect(refs.back()));
    }
    std::vector<GroundTruth> gts;
    for (int j = 0; j < 2; ++j) {
      gts.push_back({random_box(), 1 + j});
      gt_rects.push_back(rect(gts.back().box));
    }
    const AssignmentThresholds th{0.5, 0.3, true};
    const auto t = assign_targets(refs, gts, th);
    const auto o = oracle::assign(ref_rects, gt_rects, 0.5, 0.3, true);
    for (std::size_t i = 0; i < refs.size(); ++i) {
      EXPECT_EQ(t.kind[i], expected_kind(o.label[i])) << "trial " << trial << " ref " << i;
      EXPECT_EQ(t.matched_ground_truth[i], o.matched[i]);
      if (o.matched[i] >= 0) {
        const Box& g = gts[static_cast<std::size_t>(o.matched[i])].box;
        const BoxDelta d = encode_boxes(g, refs[i]);
        EXPECT_DOUBLE_EQ(t.regression[i].t_x, d.t_x);
        EXPECT_DOUBLE_EQ(t.regression[i].t_h, d.t_h);
        EXPECT_EQ(t.class_target[i], gts[static_cast<std::size_t>(o.matched[i])].class_index);
      }
    }
  }
}

}  // namespace
}  // namespace wildscan
