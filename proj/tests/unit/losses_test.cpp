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

#include "wildscan/losses.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <string>

#include "oracles.hpp"
#include "wildscan/common.hpp"

namespace wildscan {
namespace {

// Central differences carry ~1e-10 of rounding noise, so gradients smaller
// than 1e-4 are compared on an absolute scale.
double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max({1e-4, std::abs(analytic), std::abs(numeric)});
}

LossConfig focal(double gp, double gn, double m) {
  LossConfig c;
  c.classification_kind = ClassificationKind::asymmetric_focal;
  c.gamma_pos = gp;
  c.gamma_neg = gn;
  c.margin = m;
  return c;
}

TEST(CrossEntropyTest, ReferenceValues) {
  const std::vector<double> certain{0.0, 1.0, 0.0};
  EXPECT_DOUBLE_EQ(cross_entropy_loss(certain, 1), 0.0);
  const std::vector<double> uniform{0.25, 0.25, 0.25, 0.25};
  EXPECT_NEAR(cross_entropy_loss(uniform, 2), 1.386294, 1e-6);
  const std::vector<double> half{0.5, 0.3, 0.2};
  EXPECT_NEAR(cross_entropy_loss(half, 0), 0.693147, 1e-6);
}

TEST(CrossEntropyTest, ZeroProbabilityIsFinite) {
  const std::vector<double> p{1.0, 0.0};
  EXPECT_NEAR(cross_entropy_loss(p, 1), -std::log(1e-12), 1e-9);
}

TEST(CrossEntropyTest, RejectsNonDistribution) {
  const std::vector<double> p{0.5, 0.6};
  EXPECT_THROW(cross_entropy_loss(p, 0), Error);
}

TEST(AsymmetricFocalTest, ReferenceValues) {
  const LossConfig c = focal(1.0, 4.0, 0.05);
  const std::vector<double> p1{1.0};
  const std::vector<int> y1{1};
  EXPECT_DOUBLE_EQ(asymmetric_focal_loss(p1, y1, c), 0.0);
  const std::vector<double> easy{0.04};
  const std::vector<int> y0{0};
  EXPECT_DOUBLE_EQ(asymmetric_focal_loss(easy, y0, c), 0.0);
  const std::vector<double> p09{0.9};
  EXPECT_NEAR(asymmetric_focal_loss(p09, y1, c), 0.0105361, 1e-7);
}

TEST(AsymmetricFocalTest, MatchesScalarReferenceAtRandomPoints) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0.0, 1.0), g(0.0, 5.0), m(0.0, 0.3);
  for (int i = 0; i < 100; ++i) {
    const LossConfig c = focal(g(rng), g(rng), m(rng));
    std::vector<double> p(4);
    std::vector<int> y(4);
    for (int k = 0; k < 4; ++k) {
      p[k] = u(rng);
      y[k] = u(rng) < 0.3;
    }
    EXPECT_NEAR(asymmetric_focal_loss(p, y, c), oracle::afl(p, y, c.gamma_pos, c.gamma_neg, c.margin),
                1e-9);
  }
}

TEST(AsymmetricFocalTest, ReducesToBinaryCrossEntropy) {
  const LossConfig c = focal(0.0, 0.0, 0.0);
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.001, 0.999);
  for (int i = 0; i < 100; ++i) {
    const std::vector<double> p{u(rng), u(rng), u(rng)};
    const std::vector<int> y{i % 2, 0, (i / 2) % 2};
    double expected = 0.0;
    for (int k = 0; k < 3; ++k) expected += oracle::bce(p[k], y[k]);
    EXPECT_NEAR(asymmetric_focal_loss(p, y, c), expected, 1e-9);
  }
}

TEST(AsymmetricFocalTest, LargerNegativeGammaNeverIncreasesLoss) {
  const std::vector<int> y{0};
  for (double p = 0.0; p <= 1.0 + 1e-12; p += 0.01) {
    const std::vector<double> probs{std::min(p, 1.0)};
    double previous = asymmetric_focal_loss(probs, y, focal(1.0, 0.0, 0.05));
    for (double gn = 0.5; gn <= 8.0; gn += 0.5) {
      const double v = asymmetric_focal_loss(probs, y, focal(1.0, gn, 0.05));
      EXPECT_LE(v, previous + 1e-15) << "p=" << p << " gamma_neg=" << gn;
      previous = v;
    }
  }
}

TEST(AsymmetricFocalTest, NonNegativeAndFiniteOnGrid) {
  const LossConfig c = focal(1.0, 4.0, 0.05);
  for (double p = 1e-12; p <= 1.0 - 1e-12; p += 0.0125) {
    for (int y = 0; y <= 1; ++y) {
      const std::vector<double> probs{p};
      const std::vector<int> t{y};
      const double v = asymmetric_focal_loss(probs, t, c);
      EXPECT_TRUE(std::isfinite(v));
      EXPECT_GE(v, 0.0);
    }
  }
}

TEST(SmoothL1Test, ReferenceValues) {
  const double beta = 1.0 / 9.0;
  const BoxDelta zero{};
  EXPECT_DOUBLE_EQ(smooth_l1_loss(zero, zero, beta), 0.0);
  const BoxDelta at_beta{beta, beta, beta, beta};
  EXPECT_NEAR(smooth_l1_loss(at_beta, zero, beta), 4 * 0.5 * beta, 1e-15);
}

TEST(SmoothL1Test, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const double beta = 1.0 / 9.0;
  const double h = 1e-6;
  for (int i = 0; i < 100; ++i) {
    BoxDelta p{u(rng), u(rng), u(rng), u(rng)};
    const BoxDelta t{u(rng), u(rng), u(rng), u(rng)};
    const BoxDelta g = smooth_l1_gradient(p, t, beta);
    for (int k = 0; k < 4; ++k) {
      // Skip points within h of the kink.
      if (std::abs(std::abs(p[k] - t[k]) - beta) < 1e-4) continue;
      BoxDelta hi = p, lo = p;
      hi[k] += h;
      lo[k] -= h;
      const double numeric = (smooth_l1_loss(hi, t, beta) - smooth_l1_loss(lo, t, beta)) / (2 * h);
      EXPECT_LT(relative_error(g[k], numeric), 1e-4);
    }
  }
}

TEST(SoftmaxCrossEntropyTest, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> n(0.0, 2.0);
  const double h = 1e-6;
  for (int i = 0; i < 100; ++i) {
    std::vector<double> z(5);
    for (double& v : z) v = n(rng);
    const int target = i % 5;
    const auto result = softmax_cross_entropy(z, target);
    EXPECT_NEAR(result.loss, oracle::ce(softmax(z), target), 1e-9);
    for (std::size_t k = 0; k < z.size(); ++k) {
      auto hi = z, lo = z;
      hi[k] += h;
      lo[k] -= h;
      const double numeric =
          (softmax_cross_entropy(hi, target).loss - softmax_cross_entropy(lo, target).loss) / (2 * h);
      EXPECT_LT(relative_error(result.gradient[k], numeric), 1e-4);
    }
  }
}

TEST(SigmoidFocalTest, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(10);
  std::normal_distribution<double> n(0.0, 2.0);
  const LossConfig c = focal(1.0, 4.0, 0.05);
  const double h = 1e-6;
  for (int i = 0; i < 100; ++i) {
    std::vector<double> z(4);
    for (double& v : z) v = n(rng);
    std::vector<int> y(4, 0);
    y[static_cast<std::size_t>(i % 4)] = i % 3 != 0;
    const auto result = sigmoid_asymmetric_focal(z, y, c);
    for (std::size_t k = 0; k < z.size(); ++k) {
      // The margin makes the negative branch non-smooth at p = m.
      if (y[k] == 0 && std::abs(sigmoid(z[k]) - c.margin) < 1e-4) continue;
      auto hi = z, lo = z;
      hi[k] += h;
      lo[k] -= h;
      const double numeric =
          (sigmoid_asymmetric_focal(hi, y, c).loss - sigmoid_asymmetric_focal(lo, y, c).loss) /
          (2 * h);
      EXPECT_LT(relative_error(result.gradient[k], numeric), 1e-4) << "i=" << i << " k=" << k;
    }
  }
}

TEST(SigmoidBceTest, StableForLargeLogits) {
  EXPECT_NEAR(sigmoid_binary_cross_entropy(800.0, 1).first, 0.0, 1e-12);
  EXPECT_NEAR(sigmoid_binary_cross_entropy(-800.0, 1).first, 800.0, 1e-9);
  EXPECT_NEAR(sigmoid_binary_cross_entropy(0.3, 0).first, oracle::bce(sigmoid(0.3), 0), 1e-12);
}

// Builds a small multitask problem with every sample kind present.
struct MultitaskFixture {
  RpnOutputs rpn;
  HeadOutputs head;
  TrainingTargets rpn_targets;
  TrainingTargets head_targets;

  explicit MultitaskFixture(std::uint64_t seed, int classes = 4) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, 1.0);
    const SampleKind kinds[] = {SampleKind::positive, SampleKind::negative, SampleKind::ignore,
                                SampleKind::positive, SampleKind::negative, SampleKind::negative};
    for (SampleKind k : kinds) {
      rpn_targets.kind.push_back(k);
      rpn_targets.class_target.push_back(k == SampleKind::positive ? 1 : 0);
      rpn_targets.matched_ground_truth.push_back(k == SampleKind::positive ? 0 : -1);
      rpn_targets.regression.push_back({n(rng), n(rng), n(rng), n(rng)});
      rpn.objectness_logits.push_back(n(rng));
      rpn.deltas.push_back({n(rng), n(rng), n(rng), n(rng)});

      head_targets.kind.push_back(k);
      head_targets.class_target.push_back(
          k == SampleKind::positive ? 1 + static_cast<int>(rng() % (classes - 1)) : 0);
      head_targets.matched_ground_truth.push_back(k == SampleKind::positive ? 0 : -1);
      head_targets.regression.push_back({n(rng), n(rng), n(rng), n(rng)});
      std::vector<double> logits(static_cast<std::size_t>(classes));
      for (double& v : logits) v = n(rng);
      head.class_logits.push_back(logits);
      head.deltas.push_back({n(rng), n(rng), n(rng), n(rng)});
    }
  }
};

class MultitaskGradientTest : public ::testing::TestWithParam<ClassificationKind> {};

TEST_P(MultitaskGradientTest, AnalyticMatchesFiniteDifferences) {
  LossConfig config;
  config.classification_kind = GetParam();
  config.regression_weight = 0.7;
  const double h = 1e-6;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    MultitaskFixture f(seed);
    const LossBreakdown base = multitask_loss(f.rpn, f.head, f.rpn_targets, f.head_targets, config);
    auto total = [&](const MultitaskFixture& g) {
      return multitask_loss(g.rpn, g.head, g.rpn_targets, g.head_targets, config).total;
    };
    for (std::size_t i = 0; i < f.head.class_logits.size(); ++i) {
      for (std::size_t c = 0; c < f.head.class_logits[i].size(); ++c) {
        MultitaskFixture hi = f, lo = f;
        hi.head.class_logits[i][c] += h;
        lo.head.class_logits[i][c] -= h;
        const double numeric = (total(hi) - total(lo)) / (2 * h);
        if (config.classification_kind == ClassificationKind::asymmetric_focal && c > 0 &&
            std::abs(sigmoid(f.head.class_logits[i][c]) - config.margin) < 1e-4) {
          continue;
        }
        EXPECT_LT(relative_error(base.d_class_logits[i][c], numeric), 1e-4)
            << "seed " << seed << " sample " << i << " class " << c;
      }
      for (int k = 0; k < 4; ++k) {
        MultitaskFixture hi = f, lo = f;
        hi.head.deltas[i][k] += h;
        lo.head.deltas[i][k] -= h;
        const double numeric = (total(hi) - total(lo)) / (2 * h);
        EXPECT_LT(relative_error(base.d_head_deltas[i][k], numeric), 1e-4);
      }
      MultitaskFixture hi = f, lo = f;
      hi.rpn.objectness_logits[i] += h;
      lo.rpn.objectness_logits[i] -= h;
      EXPECT_LT(relative_error(base.d_objectness_logits[i], (total(hi) - total(lo)) / (2 * h)),
                1e-4);
      for (int k = 0; k < 4; ++k) {
        MultitaskFixture rhi = f, rlo = f;
        rhi.rpn.deltas[i][k] += h;
        rlo.rpn.deltas[i][k] -= h;
        EXPECT_LT(relative_error(base.d_rpn_deltas[i][k], (total(rhi) - total(rlo)) / (2 * h)),
                  1e-4);
      }
    }
  }
}

INSTANTIATE_TEST_SUITE_P(BothKinds, MultitaskGradientTest,
                         ::testing::Values(ClassificationKind::cross_entropy,
                                           ClassificationKind::asymmetric_focal),
                         [](const auto& info) { return std::string(to_string(info.param)); });

TEST(MultitaskLossTest, PerfectPredictionsGiveZero) {
  MultitaskFixture f(3);
  // Make every prediction exact and confident.
  for (std::size_t i = 0; i < f.rpn_targets.size(); ++i) {
    f.rpn.objectness_logits[i] = f.rpn_targets.kind[i] == SampleKind::positive ? 800.0 : -800.0;
    f.rpn.deltas[i] = f.rpn_targets.regression[i];
    const int target =
        f.head_targets.kind[i] == SampleKind::positive ? f.head_targets.class_target[i] : 0;
    for (std::size_t c = 0; c < f.head.class_logits[i].size(); ++c) {
      f.head.class_logits[i][c] = static_cast<int>(c) == target ? 800.0 : -800.0;
    }
    f.head.deltas[i] = f.head_targets.regression[i];
  }
  const LossBreakdown b = multitask_loss(f.rpn, f.head, f.rpn_targets, f.head_targets, LossConfig{});
  EXPECT_NEAR(b.total, 0.0, 1e-12);
}

TEST(MultitaskLossTest, TotalIsWeightedSumOfTerms) {
  MultitaskFixture f(6);
  LossConfig c;
  c.regression_weight = 2.5;
  const LossBreakdown b = multitask_loss(f.rpn, f.head, f.rpn_targets, f.head_targets, c);
  EXPECT_NEAR(b.total,
              b.head_classification + 2.5 * b.head_regression + b.rpn_objectness +
                  2.5 * b.rpn_regression,
              1e-12);
}

TEST(MultitaskLossTest, NoPositivesGivesZeroRegression) {
  MultitaskFixture f(7);
  for (auto* t : {&f.rpn_targets, &f.head_targets}) {
    for (auto& k : t->kind) {
      if (k == SampleKind::positive) k = SampleKind::negative;
    }
    for (auto& c : t->class_target) c = 0;
  }
  const LossBreakdown b = multitask_loss(f.rpn, f.head, f.rpn_targets, f.head_targets, LossConfig{});
  EXPECT_EQ(b.head_regression, 0.0);
  EXPECT_EQ(b.rpn_regression, 0.0);
  EXPECT_TRUE(std::isfinite(b.total));
}

TEST(LossConfigTest, RejectsOutOfRangeFields) {
  LossConfig c;
  c.margin = 1.0;
  EXPECT_THROW(c.validate(), ValidationError);
  c = LossConfig{};
  c.regression_weight = 0.0;
  EXPECT_THROW(c.validate(), ValidationError);
  c = LossConfig{};
  c.gamma_neg = -1.0;
  EXPECT_THROW(c.validate(), ValidationError);
}

}  // namespace
}  // namespace wildscan
