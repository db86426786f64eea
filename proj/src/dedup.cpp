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

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

#include "wildscan/common.hpp"

namespace wildscan {
namespace {

constexpr int kSide = 32;

class DisjointSet {
 public:
  explicit DisjointSet(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }

  std::size_t find(std::size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent_[std::max(a, b)] = std::min(a, b);
  }

 private:
  std::vector<std::size_t> parent_;
};

std::string csv_field(const std::string& text) {
  if (text.find_first_of(",\"\n") == std::string::npos) return text;
  std::string out = "\"";
  for (char c : text) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

nlohmann::ordered_json pair_json(const DuplicatePair& p) {
  nlohmann::ordered_json j;
  j["image_a"] = p.image_a;
  j["image_b"] = p.image_b;
  j["similarity"] = p.similarity;
  j["same_category"] = p.same_category;
  j["category_a"] = p.category_a;
  j["category_b"] = p.category_b;
  return j;
}

}  // namespace

ImageEmbedding embed_image(const Image& image, const std::string& image_id) {
  if (image.empty()) throw DecodeError("image '" + image_id + "' is empty");
  const Image small = resize_area(image, kSide, kSide);
  std::vector<double> v(static_cast<std::size_t>(kSide) * kSide);
  for (int y = 0; y < kSide; ++y) {
    for (int x = 0; x < kSide; ++x) {
      v[static_cast<std::size_t>(y) * kSide + x] =
          0.299 * small.at(x, y, 0) + 0.587 * small.at(x, y, 1) + 0.114 * small.at(x, y, 2);
    }
  }
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double norm_sq = 0.0;
  for (double& x : v) {
    x -= mean;
    norm_sq += x * x;
  }
  const double norm = std::sqrt(norm_sq);
  if (norm < 1e-12) {
    // Flat image: no contrast left after centring.
    std::fill(v.begin(), v.end(), 1.0 / std::sqrt(static_cast<double>(v.size())));
  } else {
    for (double& x : v) x /= norm;
  }
  return {image_id, std::move(v), kEmbeddingExtractor};
}

ImageEmbedding embed_image_bytes(std::span<const std::uint8_t> bytes, const std::string& image_id) {
  Image image;
  try {
    image = decode_image(bytes);
  } catch (const DecodeError& e) {
    throw DecodeError("image '" + image_id + "': " + e.what());
  }
  return embed_image(image, image_id);
}

double cosine_similarity(const ImageEmbedding& a, const ImageEmbedding& b) {
  if (a.vector.size() != b.vector.size()) throw Error("embedding lengths differ");
  double dot = 0.0;
  for (std::size_t i = 0; i < a.vector.size(); ++i) dot += a.vector[i] * b.vector[i];
  return std::clamp(dot, -1.0, 1.0);
}

DedupReport find_duplicates(std::span<const DedupItem> items, double threshold) {
  if (!(threshold > 0.0 && threshold <= 1.0)) {
    throw ValidationError("dedup.threshold", std::nullopt, "must be in (0, 1]");
  }
  DedupReport report;
  report.threshold = threshold;
  if (!items.empty()) report.extractor_id = items.front().embedding.extractor_id;
  for (const auto& item : items) {
    if (item.embedding.extractor_id != report.extractor_id) {
      throw Error("mixed embedding extractors: '" + report.extractor_id + "' and '" +
                  item.embedding.extractor_id + "'");
    }
  }

  // Work in image_id order so that every choice below is deterministic.
  std::vector<std::size_t> order(items.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return items[a].embedding.image_id < items[b].embedding.image_id;
  });
  for (std::size_t i = 1; i < order.size(); ++i) {
    if (items[order[i]].embedding.image_id == items[order[i - 1]].embedding.image_id) {
      throw Error("duplicate image_id '" + items[order[i]].embedding.image_id + "'");
    }
  }

  DisjointSet clusters(order.size());
  std::set<std::size_t> in_conflict;
  for (std::size_t i = 0; i < order.size(); ++i) {
    const DedupItem& a = items[order[i]];
    for (std::size_t j = i + 1; j < order.size(); ++j) {
      const DedupItem& b = items[order[j]];
      if (a.species != b.species) continue;
      const double similarity = cosine_similarity(a.embedding, b.embedding);
      if (similarity < threshold) continue;
      DuplicatePair pair{a.embedding.image_id, b.embedding.image_id, similarity,
                         a.category == b.category, a.category, b.category};
      report.duplicates.push_back(pair);
      if (pair.same_category) {
        clusters.unite(i, j);
      } else {
        report.conflicts.push_back(pair);
        report.review_queue.push_back(pair);
        in_conflict.insert(i);
        in_conflict.insert(j);
      }
    }
  }
  for (std::size_t i = 0; i < order.size(); ++i) {
    const std::string& id = items[order[i]].embedding.image_id;
    // Roots are the smallest index, i.e. the lowest image_id, of each cluster.
    if (clusters.find(i) == i || in_conflict.count(i) > 0) {
      report.keep_set.insert(id);
    } else {
      report.removed.insert(id);
    }
  }
  return report;
}

std::vector<DedupItem> embed_manifest(const DatasetManifest& manifest, const ImageLoader& loader) {
  std::vector<DedupItem> items;
  items.reserve(manifest.images.size());
  for (const auto& record : manifest.images) {
    Image image;
    try {
      image = loader(record);
    } catch (const Error& e) {
      throw DecodeError("image '" + record.image_id + "': " + e.what());
    }
    items.push_back({embed_image(image, record.image_id), record.category_label,
                     record.species_group});
  }
  return items;
}

nlohmann::ordered_json dedup_report_to_json(const DedupReport& report) {
  nlohmann::ordered_json j;
  j["extractor_id"] = report.extractor_id;
  j["threshold"] = report.threshold;
  auto pairs = [](const std::vector<DuplicatePair>& list) {
    nlohmann::ordered_json out = nlohmann::ordered_json::array();
    for (const auto& p : list) out.push_back(pair_json(p));
    return out;
  };
  j["duplicates"] = pairs(report.duplicates);
  j["conflicts"] = pairs(report.conflicts);
  j["keep_set"] = report.keep_set;
  j["removed"] = report.removed;
  j["review_queue"] = pairs(report.review_queue);
  return j;
}

std::string review_queue_csv(const DedupReport& report) {
  std::ostringstream out;
  out << "image_a,image_b,similarity,category_a,category_b\n";
  for (const auto& p : report.review_queue) {
    out << csv_field(p.image_a) << ',' << csv_field(p.image_b) << ','
        << shortest_repr(p.similarity) << ',' << csv_field(p.category_a) << ','
        << csv_field(p.category_b) << '\n';
  }
  return out.str();
}

}  // namespace wildscan
