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

#include "wildscan/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

#include "wildscan/common.hpp"

namespace wildscan {
namespace {

struct Style {
  std::array<int, 3> base;
  std::array<int, 3> accent;
};

Style style_of(const std::string& eval_class) {
  if (eval_class == "elephant") return {{232, 222, 196}, {196, 180, 150}};
  if (eval_class == "tiger") return {{236, 128, 28}, {20, 16, 12}};
  if (eval_class == "pangolin") return {{124, 84, 44}, {70, 44, 22}};
  if (eval_class == "non_wildlife") return {{60, 96, 210}, {220, 220, 240}};
  throw Error("no synthetic style for class '" + eval_class + "'");
}

std::uint8_t saturate(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

void fill_background(Image& image, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> noise(-18, 18);
  std::uniform_real_distribution<double> phase(0.0, 6.283185307179586);
  const double px = phase(rng);
  const double py = phase(rng);
  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < image.width; ++x) {
      const double wave = 14.0 * std::sin(0.07 * x + px) * std::cos(0.05 * y + py);
      image.at(x, y, 0) = saturate(78 + wave + noise(rng));
      image.at(x, y, 1) = saturate(92 + wave + noise(rng));
      image.at(x, y, 2) = saturate(70 + wave + noise(rng));
    }
  }
}

}  // namespace

std::string synthetic_category(const std::string& eval_class) {
  if (eval_class == "elephant") return "ivory";
  if (eval_class == "tiger") return "claw (tiger)";
  if (eval_class == "pangolin") return "raw scale";
  if (eval_class == "non_wildlife") return "elephant non-wildlife";
  throw Error("no synthetic category for class '" + eval_class + "'");
}

void draw_synthetic_object(Image& image, const std::string& eval_class, const Box& box,
                           std::uint64_t seed) {
  const Style style = style_of(eval_class);
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> noise(-10, 10);
  const int x0 = static_cast<int>(std::floor(box.x_min));
  const int y0 = static_cast<int>(std::floor(box.y_min));
  const int x1 = static_cast<int>(std::ceil(box.x_max));
  const int y1 = static_cast<int>(std::ceil(box.y_max));
  const double cx = box.center_x();
  const double cy = box.center_y();
  const double rx = box.width() / 2.0;
  const double ry = box.height() / 2.0;

  for (int y = std::max(0, y0); y < std::min(image.height, y1); ++y) {
    for (int x = std::max(0, x0); x < std::min(image.width, x1); ++x) {
      const double u = x + 0.5 - box.x_min;
      const double v = y + 0.5 - box.y_min;
      bool inside = true;
      bool accent = false;
      if (eval_class == "elephant") {
        // Ellipse with faint growth rings.
        const double dx = (x + 0.5 - cx) / rx;
        const double dy = (y + 0.5 - cy) / ry;
        const double r = std::sqrt(dx * dx + dy * dy);
        inside = r <= 1.0;
        accent = std::fmod(r * 5.0, 1.0) < 0.25;
      } else if (eval_class == "tiger") {
        accent = std::fmod(u, 9.0) < 3.5;
      } else if (eval_class == "pangolin") {
        // Overlapping scale rows.
        const double row = std::floor(v / 8.0);
        const double shifted = u + (static_cast<int>(row) % 2) * 5.0;
        const double du = std::fmod(shifted, 10.0) - 5.0;
        const double dv = std::fmod(v, 8.0);
        accent = dv > 6.0 - std::abs(du) * 0.4;
      } else {
        const double dx = x + 0.5 - cx;
        const double dy = y + 0.5 - cy;
        inside = std::abs(dx) / rx + std::abs(dy) / ry <= 1.0;
        accent = std::abs(dx) < 3.0 || std::abs(dy) < 3.0;
      }
      if (!inside) continue;
      const auto& colour = accent ? style.accent : style.base;
      for (int c = 0; c < 3; ++c) image.at(x, y, c) = saturate(colour[static_cast<std::size_t>(c)] + noise(rng));
    }
  }
}

SyntheticCorpus generate_synthetic_corpus(const SynthOptions& options) {
  if (options.images_per_class < 1) throw Error("images_per_class must be >= 1");
  if (options.min_object_size < 8 || options.max_object_size < options.min_object_size ||
      options.max_object_size > options.image_size) {
    throw Error("object size range must fit inside the image");
  }
  SyntheticCorpus corpus;
  corpus.manifest.taxonomy = CategoryTaxonomy::wildlife_default();
  std::mt19937_64 rng(options.seed);
  std::uniform_int_distribution<int> size(options.min_object_size, options.max_object_size);
  int counter = 0;
  for (int i = 0; i < options.images_per_class; ++i) {
    for (const auto& eval_class : options.classes) {
      char id[64];
      std::snprintf(id, sizeof id, "%s_%04d", options.id_prefix.c_str(), counter++);
      Image image(options.image_size, options.image_size);
      fill_background(image, rng);
      const int w = size(rng);
      const int h = size(rng);
      std::uniform_int_distribution<int> px(0, options.image_size - w);
      std::uniform_int_distribution<int> py(0, options.image_size - h);
      const int x = px(rng);
      const int y = py(rng);
      const Box box{static_cast<double>(x), static_cast<double>(y), static_cast<double>(x + w),
                    static_cast<double>(y + h)};
      draw_synthetic_object(image, eval_class, box, rng());

      const std::string category = synthetic_category(eval_class);
      std::string species = eval_class;
      for (const auto& group : corpus.manifest.taxonomy.species_groups) {
        const auto& names = group.product_category_names;
        if (std::find(names.begin(), names.end(), category) != names.end()) {
          species = group.species_name;
        }
      }
      corpus.manifest.images.push_back(ImageRecord{id, std::string(id) + ".png", image.width,
                                                   image.height, category, species});
      corpus.manifest.annotations.push_back(BoxAnnotation{id, box, category, false});
      corpus.images.emplace(id, std::move(image));
    }
  }
  validate_manifest(corpus.manifest);
  return corpus;
}

void write_synthetic_corpus(const SyntheticCorpus& corpus, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (const auto& record : corpus.manifest.images) {
    write_png(corpus.images.at(record.image_id), dir / record.uri);
  }
  save_manifest(corpus.manifest, dir / "manifest.json");
}

}  // namespace wildscan
