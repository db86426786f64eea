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

#include "wildscan/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "wildscan/common.hpp"

namespace wildscan {
namespace {

using nlohmann::json;
using nlohmann::ordered_json;

std::string indexed(const std::string& array, std::size_t index) {
  return array + "[" + std::to_string(index) + "]";
}

const json& require(const json& object, const std::string& key, const std::string& path,
                    std::optional<std::size_t> index) {
  if (!object.is_object()) throw ValidationError(path, index, "expected an object");
  auto it = object.find(key);
  if (it == object.end()) throw ValidationError(path + "." + key, index, "missing field");
  return *it;
}

std::string require_string(const json& object, const std::string& key, const std::string& path,
                           std::optional<std::size_t> index) {
  const json& value = require(object, key, path, index);
  if (!value.is_string()) throw ValidationError(path + "." + key, index, "expected a string");
  return value.get<std::string>();
}

double require_number(const json& object, const std::string& key, const std::string& path,
                      std::optional<std::size_t> index) {
  const json& value = require(object, key, path, index);
  if (!value.is_number()) throw ValidationError(path + "." + key, index, "expected a number");
  return value.get<double>();
}

int require_int(const json& object, const std::string& key, const std::string& path,
                std::optional<std::size_t> index) {
  const json& value = require(object, key, path, index);
  if (!value.is_number_integer())
    throw ValidationError(path + "." + key, index, "expected an integer");
  return value.get<int>();
}

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (const auto& item : items) {
    if (!out.empty()) out += ", ";
    out += item;
  }
  return out;
}

// Deterministic across standard libraries: mt19937_64 output is fully
// specified, unlike the std:: distributions.
template <typename T>
void seeded_shuffle(std::vector<T>& items, std::mt19937_64& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const std::size_t j = rng() % i;
    std::swap(items[i - 1], items[j]);
  }
}

}  // namespace

std::optional<std::string> CategoryTaxonomy::eval_class_of(const std::string& category) const {
  auto it = class_mapping.find(category);
  if (it == class_mapping.end()) return std::nullopt;
  return it->second;
}

CategoryTaxonomy CategoryTaxonomy::wildlife_default() {
  CategoryTaxonomy taxonomy;
  taxonomy.species_groups = {
      {"elephant",
       {"ambiguous mammoth", "antique ivory", "elephant skin", "ivory", "elephant non-wildlife"}},
      {"pangolin",
       {"claw (pangolin)", "crafted scale", "parched scale", "raw scale", "pangolin non-wildlife"}},
      {"tiger",
       {"bone ambiguous", "claw (tiger)", "fang ambiguous", "other (tiger)", "tiger non-wildlife"}},
  };
  for (const auto& group : taxonomy.species_groups) {
    for (const auto& category : group.product_category_names) {
      const bool non_wildlife = category.find("non-wildlife") != std::string::npos;
      taxonomy.class_mapping[category] =
          non_wildlife ? std::string(kNonWildlife) : group.species_name;
    }
  }
  return taxonomy;
}

std::string_view to_string(Split split) {
  switch (split) {
    case Split::train:
      return "train";
    case Split::val:
      return "val";
    case Split::test:
      return "test";
  }
  return "train";
}

Split parse_split(std::string_view text) {
  if (text == "train") return Split::train;
  if (text == "val") return Split::val;
  if (text == "test") return Split::test;
  throw ValidationError("splits", std::nullopt, "unknown split '" + std::string(text) + "'");
}

const ImageRecord* DatasetManifest::find_image(const std::string& image_id) const {
  for (const auto& image : images) {
    if (image.image_id == image_id) return &image;
  }
  return nullptr;
}

std::vector<const ImageRecord*> DatasetManifest::images_in(Split split) const {
  std::vector<const ImageRecord*> out;
  for (const auto& image : images) {
    auto it = splits.find(image.image_id);
    if (it != splits.end() && it->second == split) out.push_back(&image);
  }
  return out;
}

std::vector<const BoxAnnotation*> DatasetManifest::annotations_for(
    const std::string& image_id) const {
  std::vector<const BoxAnnotation*> out;
  for (const auto& annotation : annotations) {
    if (annotation.image_id == image_id) out.push_back(&annotation);
  }
  return out;
}

void validate_manifest(const DatasetManifest& manifest) {
  const auto& taxonomy = manifest.taxonomy;
  for (std::size_t g = 0; g < taxonomy.species_groups.size(); ++g) {
    for (const auto& category : taxonomy.species_groups[g].product_category_names) {
      if (!taxonomy.class_mapping.contains(category)) {
        throw ValidationError(indexed("taxonomy.species_groups", g), g,
                              "category '" + category + "' has no evaluation class");
      }
    }
  }

  std::map<std::string, const ImageRecord*> by_id;
  for (std::size_t i = 0; i < manifest.images.size(); ++i) {
    const auto& image = manifest.images[i];
    const std::string path = indexed("images", i);
    if (image.image_id.empty()) throw ValidationError(path + ".image_id", i, "must not be empty");
    if (!by_id.emplace(image.image_id, &image).second) {
      throw ValidationError(path + ".image_id", i, "duplicate image_id '" + image.image_id + "'");
    }
    if (image.width <= 0) throw ValidationError(path + ".width", i, "must be > 0");
    if (image.height <= 0) throw ValidationError(path + ".height", i, "must be > 0");
    if (!taxonomy.class_mapping.contains(image.category_label)) {
      throw ValidationError(path + ".category_label", i,
                            "category '" + image.category_label + "' not in taxonomy");
    }
  }

  std::set<std::string> dangling;
  for (const auto& annotation : manifest.annotations) {
    if (!by_id.contains(annotation.image_id)) dangling.insert(annotation.image_id);
  }
  if (!dangling.empty()) {
    throw ValidationError("annotations", std::nullopt,
                          "annotations reference unknown image_ids: " +
                              join({dangling.begin(), dangling.end()}));
  }

  for (std::size_t i = 0; i < manifest.annotations.size(); ++i) {
    const auto& annotation = manifest.annotations[i];
    const std::string path = indexed("annotations", i);
    const Box& b = annotation.box;
    if (!(b.x_min < b.x_max) || !(b.y_min < b.y_max)) {
      throw ValidationError(path + ".box", i, "degenerate box (requires x_min < x_max, y_min < y_max)");
    }
    const ImageRecord& image = *by_id.at(annotation.image_id);
    if (b.x_min < 0 || b.y_min < 0 || b.x_max > image.width || b.y_max > image.height) {
      throw ValidationError(path + ".box", i, "box outside image bounds");
    }
    if (!taxonomy.class_mapping.contains(annotation.category)) {
      throw ValidationError(path + ".category", i,
                            "category '" + annotation.category + "' not in taxonomy");
    }
  }

  if (!manifest.splits.empty()) {
    for (const auto& [image_id, split] : manifest.splits) {
      if (!by_id.contains(image_id)) {
        throw ValidationError("splits." + image_id, std::nullopt, "unknown image_id");
      }
    }
    for (std::size_t i = 0; i < manifest.images.size(); ++i) {
      if (!manifest.splits.contains(manifest.images[i].image_id)) {
        throw ValidationError(indexed("images", i), i, "image has no split assignment");
      }
    }
  }
}

DatasetManifest manifest_from_json(const json& doc) {
  if (!doc.is_object()) throw ValidationError("$", std::nullopt, "manifest must be an object");
  DatasetManifest manifest;

  const json& taxonomy = require(doc, "taxonomy", "$", std::nullopt);
  const json& groups = require(taxonomy, "species_groups", "taxonomy", std::nullopt);
  if (!groups.is_array()) {
    throw ValidationError("taxonomy.species_groups", std::nullopt, "expected an array");
  }
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const std::string path = indexed("taxonomy.species_groups", g);
    SpeciesGroup group;
    group.species_name = require_string(groups[g], "species_name", path, g);
    const json& names = require(groups[g], "product_category_names", path, g);
    if (!names.is_array()) {
      throw ValidationError(path + ".product_category_names", g, "expected an array");
    }
    for (const auto& name : names) {
      if (!name.is_string()) {
        throw ValidationError(path + ".product_category_names", g, "expected strings");
      }
      group.product_category_names.push_back(name.get<std::string>());
    }
    manifest.taxonomy.species_groups.push_back(std::move(group));
  }
  const json& mapping = require(taxonomy, "class_mapping", "taxonomy", std::nullopt);
  if (!mapping.is_object()) {
    throw ValidationError("taxonomy.class_mapping", std::nullopt, "expected an object");
  }
  for (const auto& [category, eval_class] : mapping.items()) {
    if (!eval_class.is_string()) {
      throw ValidationError("taxonomy.class_mapping." + category, std::nullopt,
                            "expected a string");
    }
    manifest.taxonomy.class_mapping[category] = eval_class.get<std::string>();
  }

  const json& images = require(doc, "images", "$", std::nullopt);
  if (!images.is_array()) throw ValidationError("images", std::nullopt, "expected an array");
  for (std::size_t i = 0; i < images.size(); ++i) {
    const std::string path = indexed("images", i);
    ImageRecord image;
    image.image_id = require_string(images[i], "image_id", path, i);
    image.uri = require_string(images[i], "uri", path, i);
    image.width = require_int(images[i], "width", path, i);
    image.height = require_int(images[i], "height", path, i);
    image.category_label = require_string(images[i], "category_label", path, i);
    image.species_group = require_string(images[i], "species_group", path, i);
    manifest.images.push_back(std::move(image));
  }

  const json& annotations = require(doc, "annotations", "$", std::nullopt);
  if (!annotations.is_array()) {
    throw ValidationError("annotations", std::nullopt, "expected an array");
  }
  for (std::size_t i = 0; i < annotations.size(); ++i) {
    const std::string path = indexed("annotations", i);
    BoxAnnotation annotation;
    annotation.image_id = require_string(annotations[i], "image_id", path, i);
    const json& box = require(annotations[i], "box", path, i);
    annotation.box.x_min = require_number(box, "x_min", path + ".box", i);
    annotation.box.y_min = require_number(box, "y_min", path + ".box", i);
    annotation.box.x_max = require_number(box, "x_max", path + ".box", i);
    annotation.box.y_max = require_number(box, "y_max", path + ".box", i);
    annotation.category = require_string(annotations[i], "category", path, i);
    const json& grouped = require(annotations[i], "grouped", path, i);
    if (!grouped.is_boolean()) throw ValidationError(path + ".grouped", i, "expected a boolean");
    annotation.grouped = grouped.get<bool>();
    manifest.annotations.push_back(std::move(annotation));
  }

  const json& splits = require(doc, "splits", "$", std::nullopt);
  if (!splits.is_object()) throw ValidationError("splits", std::nullopt, "expected an object");
  for (const auto& [image_id, split] : splits.items()) {
    if (!split.is_string()) {
      throw ValidationError("splits." + image_id, std::nullopt, "expected a string");
    }
    manifest.splits[image_id] = parse_split(split.get<std::string>());
  }

  validate_manifest(manifest);
  return manifest;
}

ordered_json manifest_to_json(const DatasetManifest& manifest) {
  ordered_json doc;
  ordered_json groups = ordered_json::array();
  for (const auto& group : manifest.taxonomy.species_groups) {
    ordered_json entry;
    entry["species_name"] = group.species_name;
    entry["product_category_names"] = group.product_category_names;
    groups.push_back(std::move(entry));
  }
  ordered_json mapping = ordered_json::object();
  for (const auto& [category, eval_class] : manifest.taxonomy.class_mapping) {
    mapping[category] = eval_class;
  }
  doc["taxonomy"] = {{"species_groups", std::move(groups)}, {"class_mapping", std::move(mapping)}};

  ordered_json images = ordered_json::array();
  for (const auto& image : manifest.images) {
    ordered_json entry;
    entry["image_id"] = image.image_id;
    entry["uri"] = image.uri;
    entry["width"] = image.width;
    entry["height"] = image.height;
    entry["category_label"] = image.category_label;
    entry["species_group"] = image.species_group;
    images.push_back(std::move(entry));
  }
  doc["images"] = std::move(images);

  ordered_json annotations = ordered_json::array();
  for (const auto& annotation : manifest.annotations) {
    ordered_json entry;
    entry["image_id"] = annotation.image_id;
    ordered_json box;
    box["x_min"] = annotation.box.x_min;
    box["y_min"] = annotation.box.y_min;
    box["x_max"] = annotation.box.x_max;
    box["y_max"] = annotation.box.y_max;
    entry["box"] = std::move(box);
    entry["category"] = annotation.category;
    entry["grouped"] = annotation.grouped;
    annotations.push_back(std::move(entry));
  }
  doc["annotations"] = std::move(annotations);

  ordered_json splits = ordered_json::object();
  for (const auto& [image_id, split] : manifest.splits) splits[image_id] = to_string(split);
  doc["splits"] = std::move(splits);
  return doc;
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open manifest " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError("$", std::nullopt, std::string("not valid JSON: ") + e.what());
  }
  return manifest_from_json(doc);
}

std::string serialize_manifest(const DatasetManifest& manifest) {
  return manifest_to_json(manifest).dump(2) + "\n";
}

void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write manifest " + path.string());
  out << serialize_manifest(manifest);
}

std::map<std::string, std::size_t> category_histogram(const DatasetManifest& manifest) {
  std::map<std::string, std::size_t> histogram;
  for (const auto& image : manifest.images) ++histogram[image.category_label];
  return histogram;
}

DatasetManifest map_to_eval_classes(const DatasetManifest& manifest, const ClassMode& mode) {
  const auto& taxonomy = manifest.taxonomy;

  std::set<std::string> unmapped;
  auto check = [&](const std::string& category) {
    if (!taxonomy.class_mapping.contains(category)) unmapped.insert(category);
  };
  for (const auto& image : manifest.images) check(image.category_label);
  for (const auto& annotation : manifest.annotations) check(annotation.category);
  if (!unmapped.empty()) {
    throw ValidationError("taxonomy.class_mapping", std::nullopt,
                          "unmapped categories: " + join({unmapped.begin(), unmapped.end()}));
  }

  if (mode.species) {
    const bool known = std::any_of(
        taxonomy.species_groups.begin(), taxonomy.species_groups.end(),
        [&](const SpeciesGroup& group) { return group.species_name == *mode.species; });
    if (!known) {
      throw ValidationError("mode.species", std::nullopt,
                            "unknown species '" + *mode.species + "'");
    }
  }

  auto target_class = [&](const std::string& category) {
    std::string eval_class = taxonomy.class_mapping.at(category);
    if (mode.species && eval_class != kNonWildlife && eval_class != *mode.species) {
      throw ValidationError("taxonomy.class_mapping." + category, std::nullopt,
                            "maps to '" + eval_class + "', outside species '" + *mode.species +
                                "'");
    }
    return eval_class;
  };

  DatasetManifest out;
  std::set<std::string> kept;
  for (const auto& image : manifest.images) {
    if (mode.species && image.species_group != *mode.species) continue;
    ImageRecord mapped = image;
    mapped.category_label = target_class(image.category_label);
    kept.insert(image.image_id);
    out.images.push_back(std::move(mapped));
  }
  for (const auto& annotation : manifest.annotations) {
    if (!kept.contains(annotation.image_id)) continue;
    BoxAnnotation mapped = annotation;
    mapped.category = target_class(annotation.category);
    out.annotations.push_back(std::move(mapped));
  }
  for (const auto& [image_id, split] : manifest.splits) {
    if (kept.contains(image_id)) out.splits[image_id] = split;
  }

  for (const auto& group : taxonomy.species_groups) {
    if (mode.species && group.species_name != *mode.species) continue;
    std::set<std::string> classes;
    for (const auto& category : group.product_category_names) {
      classes.insert(target_class(category));
    }
    out.taxonomy.species_groups.push_back({group.species_name, {classes.begin(), classes.end()}});
    for (const auto& eval_class : classes) out.taxonomy.class_mapping[eval_class] = eval_class;
  }
  // classes used by records but absent from every group still need identity entries
  for (const auto& image : out.images) {
    out.taxonomy.class_mapping[image.category_label] = image.category_label;
  }
  for (const auto& annotation : out.annotations) {
    out.taxonomy.class_mapping[annotation.category] = annotation.category;
  }
  return out;
}

std::array<std::size_t, 3> stratified_part_sizes(std::size_t count,
                                                 const SplitFractions& fractions) {
  const std::array<double, 3> f = {fractions.train, fractions.val, fractions.test};
  std::array<std::size_t, 3> sizes{};
  std::array<double, 3> remainder{};
  std::size_t assigned = 0;
  for (int p = 0; p < 3; ++p) {
    const double exact = static_cast<double>(count) * f[p];
    const double floored = std::floor(exact + 1e-9);
    sizes[p] = static_cast<std::size_t>(floored);
    remainder[p] = std::max(0.0, exact - floored);
    assigned += sizes[p];
  }
  std::array<int, 3> order = {0, 1, 2};
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return remainder[a] > remainder[b] + 1e-12; });
  for (std::size_t k = 0; assigned < count; ++k, ++assigned) ++sizes[order[k % 3]];
  return sizes;
}

DatasetManifest split_dataset(const DatasetManifest& manifest, const SplitFractions& fractions,
                              std::uint64_t seed, const SplitOptions& options) {
  const std::array<double, 3> f = {fractions.train, fractions.val, fractions.test};
  for (double value : f) {
    if (!(value >= 0.0)) throw ValidationError("fractions", std::nullopt, "must be >= 0");
  }
  if (std::abs(f[0] + f[1] + f[2] - 1.0) > 1e-9) {
    throw ValidationError("fractions", std::nullopt, "must sum to 1");
  }
  const std::size_t nonzero_parts =
      static_cast<std::size_t>(std::count_if(f.begin(), f.end(), [](double v) { return v > 0; }));

  std::map<std::string, std::vector<std::string>> by_class;
  for (const auto& image : manifest.images) {
    auto eval_class = manifest.taxonomy.eval_class_of(image.category_label);
    if (!eval_class) {
      throw ValidationError("taxonomy.class_mapping", std::nullopt,
                            "unmapped category '" + image.category_label + "'");
    }
    by_class[*eval_class].push_back(image.image_id);
  }

  DatasetManifest out = manifest;
  out.splits.clear();
  std::mt19937_64 rng(seed);
  for (auto& [eval_class, ids] : by_class) {
    if (options.require_every_part && ids.size() < nonzero_parts) {
      throw ValidationError("splits", std::nullopt,
                            "class '" + eval_class + "' has " + std::to_string(ids.size()) +
                                " images, fewer than the " + std::to_string(nonzero_parts) +
                                " nonzero split parts");
    }
    std::sort(ids.begin(), ids.end());
    seeded_shuffle(ids, rng);
    const auto sizes = stratified_part_sizes(ids.size(), fractions);
    std::size_t cursor = 0;
    const std::array<Split, 3> parts = {Split::train, Split::val, Split::test};
    for (int p = 0; p < 3; ++p) {
      for (std::size_t k = 0; k < sizes[p]; ++k) out.splits[ids[cursor++]] = parts[p];
    }
  }
  return out;
}

double round_half_even_2dp(double value) { return std::nearbyint(value * 100.0) / 100.0; }

std::vector<BoxAnnotation> import_labeling_export(const json& records,
                                                  const std::vector<ImageRecord>& images) {
  if (!records.is_array()) throw ValidationError("$", std::nullopt, "expected an array of records");
  std::vector<BoxAnnotation> out;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const std::string path = indexed("records", i);
    const std::string key = require_string(records[i], "image", path, i);
    const ImageRecord* image = nullptr;
    for (const auto& candidate : images) {
      if (candidate.image_id == key || candidate.uri == key) {
        image = &candidate;
        break;
      }
    }
    if (image == nullptr) throw ValidationError(path + ".image", i, "unknown image '" + key + "'");
    const json& rect = require(records[i], "rectangle", path, i);
    const double x = require_number(rect, "x", path + ".rectangle", i);
    const double y = require_number(rect, "y", path + ".rectangle", i);
    const double w = require_number(rect, "width", path + ".rectangle", i);
    const double h = require_number(rect, "height", path + ".rectangle", i);

    BoxAnnotation annotation;
    annotation.image_id = image->image_id;
    annotation.category = require_string(records[i], "label", path, i);
    annotation.box.x_min = round_half_even_2dp(x / 100.0 * image->width);
    annotation.box.y_min = round_half_even_2dp(y / 100.0 * image->height);
    annotation.box.x_max = round_half_even_2dp((x + w) / 100.0 * image->width);
    annotation.box.y_max = round_half_even_2dp((y + h) / 100.0 * image->height);
    if (auto it = records[i].find("grouped"); it != records[i].end() && it->is_boolean()) {
      annotation.grouped = it->get<bool>();
    }
    if (!annotation.box.valid()) {
      throw ValidationError(path + ".rectangle", i, "degenerate rectangle");
    }
    out.push_back(std::move(annotation));
  }
  return out;
}

}  // namespace wildscan
