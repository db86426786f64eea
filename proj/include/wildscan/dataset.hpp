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

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "wildscan/box.hpp"

namespace wildscan {

// Evaluation classes of the multi-species detector, in report column order.
inline constexpr std::array<std::string_view, 4> kEvalClasses = {"elephant", "tiger", "pangolin",
                                                                 "non_wildlife"};
inline constexpr std::string_view kNonWildlife = "non_wildlife";

struct SpeciesGroup {
  std::string species_name;
  std::vector<std::string> product_category_names;
};

// Product categories grouped by species, plus the category -> evaluation
// class mapping. The mapping is data: adding a category or species needs no
// code change.
struct CategoryTaxonomy {
  std::vector<SpeciesGroup> species_groups;
  std::map<std::string, std::string> class_mapping;

  std::optional<std::string> eval_class_of(const std::string& category) const;

  // The elephant / pangolin / tiger taxonomy with per-species non-wildlife
  // pools. Category names are unique across species, so the two "claw"
  // categories are qualified by species.
  static CategoryTaxonomy wildlife_default();
};

struct ImageRecord {
  std::string image_id;
  std::string uri;
  int width = 0;
  int height = 0;
  std::string category_label;
  std::string species_group;
};

struct BoxAnnotation {
  std::string image_id;
  Box box;
  std::string category;
  // The box covers a group of objects that could not be separated.
  bool grouped = false;
};

enum class Split { train, val, test };

std::string_view to_string(Split split);
Split parse_split(std::string_view text);

struct DatasetManifest {
  CategoryTaxonomy taxonomy;
  std::vector<ImageRecord> images;
  std::vector<BoxAnnotation> annotations;
  // Empty for a manifest that has not been split yet; otherwise covers every
  // image exactly once.
  std::map<std::string, Split> splits;

  const ImageRecord* find_image(const std::string& image_id) const;
  std::vector<const ImageRecord*> images_in(Split split) const;
  std::vector<const BoxAnnotation*> annotations_for(const std::string& image_id) const;
};

// Throws ValidationError naming the field and record index of the first
// violation; dangling annotations are reported together with every offending
// image_id.
void validate_manifest(const DatasetManifest& manifest);

DatasetManifest manifest_from_json(const nlohmann::json& doc);
nlohmann::ordered_json manifest_to_json(const DatasetManifest& manifest);

DatasetManifest load_manifest(const std::filesystem::path& path);
// Canonical text: fixed key order, two-space indentation, trailing newline.
std::string serialize_manifest(const DatasetManifest& manifest);
void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

// Image counts keyed by category_label.
std::map<std::string, std::size_t> category_histogram(const DatasetManifest& manifest);

struct ClassMode {
  // Empty for multi-species mode.
  std::optional<std::string> species;

  static ClassMode multi_species() { return {}; }
  static ClassMode single_species(std::string name) { return {std::move(name)}; }
};

// Relabels images and annotations to evaluation classes. Single-species mode
// keeps only images of that species and maps to {species, non_wildlife}.
// Idempotent.
DatasetManifest map_to_eval_classes(const DatasetManifest& manifest, const ClassMode& mode);

struct SplitFractions {
  double train = 0.8;
  double val = 0.1;
  double test = 0.1;
};

struct SplitOptions {
  // Reject classes with fewer images than there are splits with a nonzero
  // fraction. Disable to split tiny corpora anyway.
  bool require_every_part = true;
};

// Per-class part sizes: floor(n * f) for each part, then the remaining images
// go one each to the parts with the largest fractional remainders (ties go to
// the earlier part in train, val, test order).
std::array<std::size_t, 3> stratified_part_sizes(std::size_t count, const SplitFractions& fractions);

// Stratified by evaluation class; membership is decided by a seeded shuffle of
// each class's images (sorted by image_id first).
DatasetManifest split_dataset(const DatasetManifest& manifest, const SplitFractions& fractions,
                              std::uint64_t seed, const SplitOptions& options = {});

// Converts labeling-tool export records
//   {"image": <image_id or uri>, "label": <category>,
//    "rectangle": {"x", "y", "width", "height"}, "grouped": <optional bool>}
// with rectangle values in percent of the image into pixel boxes. Pixel values
// are rounded half-to-even to 2 decimals.
std::vector<BoxAnnotation> import_labeling_export(const nlohmann::json& records,
                                                  const std::vector<ImageRecord>& images);

double round_half_even_2dp(double value);

}  // namespace wildscan
