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

#include <cstdint>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "wildscan/dataset.hpp"
#include "wildscan/image.hpp"
#include "wildscan/image_source.hpp"

namespace wildscan {

// 32x32 area-averaged grayscale, mean-centred, L2-normalised.
inline constexpr const char* kEmbeddingExtractor = "gray32-centered-v1";
inline constexpr double kDefaultDuplicateThreshold = 0.92;

struct ImageEmbedding {
  std::string image_id;
  std::vector<double> vector;
  std::string extractor_id;
};

ImageEmbedding embed_image(const Image& image, const std::string& image_id);
// Throws DecodeError naming the image_id when the bytes do not decode.
ImageEmbedding embed_image_bytes(std::span<const std::uint8_t> bytes, const std::string& image_id);

double cosine_similarity(const ImageEmbedding& a, const ImageEmbedding& b);

struct DedupItem {
  ImageEmbedding embedding;
  std::string category;
  std::string species;  // comparison scope
};

struct DuplicatePair {
  std::string image_a;  // image_a < image_b
  std::string image_b;
  double similarity = 0.0;
  bool same_category = true;
  std::string category_a;
  std::string category_b;

  friend bool operator==(const DuplicatePair&, const DuplicatePair&) = default;
};

struct DedupReport {
  std::string extractor_id;
  double threshold = kDefaultDuplicateThreshold;
  std::vector<DuplicatePair> duplicates;  // every pair at or above threshold
  std::vector<DuplicatePair> conflicts;   // pairs whose categories differ
  std::set<std::string> keep_set;
  std::set<std::string> removed;
  std::vector<DuplicatePair> review_queue;
};

// Exact pairwise scan within each species. Same-category pairs form
// clusters by transitive closure; each cluster keeps its lowest image_id.
// Cross-category pairs go to the review queue and their members are never
// removed.
DedupReport find_duplicates(std::span<const DedupItem> items, double threshold);

// Embeds every manifest image (category and species from the record).
std::vector<DedupItem> embed_manifest(const DatasetManifest& manifest, const ImageLoader& loader);

nlohmann::ordered_json dedup_report_to_json(const DedupReport& report);
// image_a,image_b,similarity,category_a,category_b
std::string review_queue_csv(const DedupReport& report);

}  // namespace wildscan
