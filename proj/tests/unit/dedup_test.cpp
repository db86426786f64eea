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

#include "wildscan/dedup.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "wildscan/common.hpp"

namespace wildscan {
namespace {

// Smooth random image: a few overlapping gradients and rectangles.
Image random_scene(std::uint64_t seed, int w = 64, int h = 48) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> byte(0, 255);
  Image im(w, h);
  const int gx = byte(rng), gy = byte(rng);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < 3; ++c) {
        im.at(x, y, c) = static_cast<std::uint8_t>((gx * x / w + gy * y / h + 40 * c) % 256);
      }
    }
  }
  for (int r = 0; r < 4; ++r) {
    const int x0 = static_cast<int>(rng() % static_cast<std::uint64_t>(w - 8));
    const int y0 = static_cast<int>(rng() % static_cast<std::uint64_t>(h - 8));
    const int x1 = x0 + 4 + static_cast<int>(rng() % static_cast<std::uint64_t>(w - x0 - 4));
    const int y1 = y0 + 4 + static_cast<int>(rng() % static_cast<std::uint64_t>(h - y0 - 4));
    const std::uint8_t v[3] = {static_cast<std::uint8_t>(byte(rng)),
                               static_cast<std::uint8_t>(byte(rng)),
                               static_cast<std::uint8_t>(byte(rng))};
    for (int y = y0; y < y1; ++y) {
      for (int x = x0; x < x1; ++x) {
        for (int c = 0; c < 3; ++c) im.at(x, y, c) = v[c];
      }
    }
  }
  return im;
}

TEST(EmbeddingTest, IsCentredAndUnitLength) {
  const ImageEmbedding e = embed_image(random_scene(1), "a");
  EXPECT_EQ(e.extractor_id, kEmbeddingExtractor);
  double sum = 0.0, norm = 0.0;
  for (double v : e.vector) {
    sum += v;
    norm += v * v;
  }
  EXPECT_NEAR(sum, 0.0, 1e-9);
  EXPECT_NEAR(norm, 1.0, 1e-9);
  EXPECT_NEAR(cosine_similarity(e, e), 1.0, 1e-12);
}

TEST(EmbeddingTest, InvariantToBrightnessOffset) {
  Image a = random_scene(2);
  Image b = a;
  for (auto& v : b.rgb) v = static_cast<std::uint8_t>(std::min(255, v / 2 + 20));
  EXPECT_GT(cosine_similarity(embed_image(a, "a"), embed_image(b, "b")), 0.99);
}

TEST(EmbeddingTest, JpegReencodeStaysAboveThreshold) {
  for (std::uint64_t s = 10; s < 20; ++s) {
    const Image a = random_scene(s);
    const auto bytes = encode_jpeg(a, 95);
    EXPECT_GE(cosine_similarity(embed_image(a, "a"), embed_image_bytes(bytes, "b")),
              kDefaultDuplicateThreshold);
  }
}

TEST(EmbeddingTest, FlatImageHasFiniteEmbedding) {
  const ImageEmbedding e = embed_image(Image(20, 20, 128), "flat");
  for (double v : e.vector) EXPECT_TRUE(std::isfinite(v));
  EXPECT_THROW(embed_image(Image{}, "empty"), DecodeError);
  const std::vector<std::uint8_t> junk{1, 2, 3, 4};
  EXPECT_THROW(embed_image_bytes(junk, "junk"), DecodeError);
}

DedupItem item(const std::string& id, const Image& im, const std::string& category,
               const std::string& species = "elephant") {
  return {embed_image(im, id), category, species};
}

TEST(DedupTest, ExactCopyClustersAndKeepsLowestId) {
  const Image a = random_scene(3);
  const std::vector<DedupItem> items{item("b", a, "ivory"), item("a", a, "ivory"),
                                     item("c", random_scene(4), "ivory")};
  const DedupReport r = find_duplicates(items, kDefaultDuplicateThreshold);
  ASSERT_EQ(r.duplicates.size(), 1u);
  EXPECT_EQ(r.duplicates[0].image_a, "a");
  EXPECT_EQ(r.duplicates[0].image_b, "b");
  EXPECT_TRUE(r.conflicts.empty());
  EXPECT_EQ(r.keep_set, (std::set<std::string>{"a", "c"}));
  EXPECT_EQ(r.removed, (std::set<std::string>{"b"}));
}

TEST(DedupTest, CategoryConflictGoesToReviewAndKeepsBoth) {
  const Image a = random_scene(5);
  const std::vector<DedupItem> items{item("x", a, "ivory"), item("y", a, "antique ivory")};
  const DedupReport r = find_duplicates(items, kDefaultDuplicateThreshold);
  ASSERT_EQ(r.conflicts.size(), 1u);
  EXPECT_FALSE(r.conflicts[0].same_category);
  EXPECT_EQ(r.review_queue, r.conflicts);
  EXPECT_EQ(r.keep_set.size(), 2u);
  EXPECT_TRUE(r.removed.empty());
  const std::string csv = review_queue_csv(r);
  EXPECT_NE(csv.find("antique ivory"), std::string::npos);
}

TEST(DedupTest, DifferentSpeciesAreNotCompared) {
  const Image a = random_scene(6);
  const std::vector<DedupItem> items{item("p", a, "ivory", "elephant"),
                                     item("q", a, "raw scale", "pangolin")};
  EXPECT_TRUE(find_duplicates(items, kDefaultDuplicateThreshold).duplicates.empty());
}

TEST(DedupTest, TransitiveChainsFormOneCluster) {
  const Image a = random_scene(7);
  const std::vector<DedupItem> items{item("m1", a, "ivory"), item("m2", a, "ivory"),
                                     item("m3", a, "ivory")};
  const DedupReport r = find_duplicates(items, kDefaultDuplicateThreshold);
  EXPECT_EQ(r.duplicates.size(), 3u);
  EXPECT_EQ(r.keep_set, (std::set<std::string>{"m1"}));
}

TEST(DedupTest, MatchesPairwiseOracle) {
  std::vector<DedupItem> items;
  for (int i = 0; i < 24; ++i) {
    items.push_back(item("img" + std::to_string(100 + i), random_scene(1000 + i),
                         i % 3 == 0 ? "ivory" : "antique ivory", i % 2 ? "elephant" : "tiger"));
  }
  items.push_back(item("img200", random_scene(1000), "ivory", "elephant"));
  items.push_back(item("img201", random_scene(1001), "ivory", "elephant"));
  for (double threshold : {0.5, 0.8, kDefaultDuplicateThreshold}) {
    const DedupReport r = find_duplicates(items, threshold);
    std::vector<DuplicatePair> expected;
    for (std::size_t i = 0; i < items.size(); ++i) {
      for (std::size_t j = 0; j < items.size(); ++j) {
        const auto& a = items[i];
        const auto& b = items[j];
        if (!(a.embedding.image_id < b.embedding.image_id) || a.species != b.species) continue;
        double dot = 0.0;
        for (std::size_t k = 0; k < a.embedding.vector.size(); ++k) {
          dot += a.embedding.vector[k] * b.embedding.vector[k];
        }
        if (dot >= threshold) {
          expected.push_back({a.embedding.image_id, b.embedding.image_id, dot,
                              a.category == b.category, a.category, b.category});
        }
      }
    }
    auto key = [](const DuplicatePair& p) { return p.image_a + "|" + p.image_b; };
    std::sort(expected.begin(), expected.end(),
              [&](const auto& x, const auto& y) { return key(x) < key(y); });
    auto got = r.duplicates;
    std::sort(got.begin(), got.end(), [&](const auto& x, const auto& y) { return key(x) < key(y); });
    ASSERT_EQ(got.size(), expected.size()) << threshold;
    for (std::size_t k = 0; k < got.size(); ++k) {
      EXPECT_EQ(key(got[k]), key(expected[k]));
      EXPECT_NEAR(got[k].similarity, expected[k].similarity, 1e-9);
      EXPECT_EQ(got[k].same_category, expected[k].same_category);
    }
  }
}

TEST(DedupTest, InvalidThresholdAndMixedExtractors) {
  std::vector<DedupItem> items{item("a", random_scene(1), "ivory")};
  EXPECT_THROW(find_duplicates(items, 0.0), ValidationError);
  EXPECT_THROW(find_duplicates(items, 1.5), ValidationError);
  items.push_back(item("b", random_scene(2), "ivory"));
  items[1].embedding.extractor_id = "other";
  EXPECT_THROW(find_duplicates(items, 0.9), Error);
}

TEST(DedupTest, ReportJsonListsSets) {
  const Image a = random_scene(9);
  const std::vector<DedupItem> items{item("a", a, "ivory"), item("b", a, "ivory")};
  const auto j = dedup_report_to_json(find_duplicates(items, 0.9));
  EXPECT_EQ(j["removed"], nlohmann::json::array({"b"}));
  EXPECT_EQ(j["extractor_id"], kEmbeddingExtractor);
}

}  // namespace
}  // namespace wildscan
