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
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "wildscan/dataset.hpp"
#include "wildscan/image.hpp"

namespace wildscan {

// Procedural corpus of textured objects on a noisy background. Each
// evaluation class has its own colour and texture so that a small detector
// trained from scratch can tell them apart.
struct SynthOptions {
  std::vector<std::string> classes = {"elephant", "tiger", "pangolin"};
  int images_per_class = 6;
  int image_size = 128;
  int min_object_size = 40;
  int max_object_size = 72;
  std::uint64_t seed = 1;
  std::string id_prefix = "synth";
};

struct SyntheticCorpus {
  DatasetManifest manifest;  // unsplit, uri = "<image_id>.png"
  std::map<std::string, Image> images;
};

// Product category used for synthetic images of an evaluation class.
std::string synthetic_category(const std::string& eval_class);

SyntheticCorpus generate_synthetic_corpus(const SynthOptions& options);

// Draws one object of `eval_class` into `image` at `box` (pixel box inside
// the image).
void draw_synthetic_object(Image& image, const std::string& eval_class, const Box& box,
                           std::uint64_t seed);

// Writes <dir>/<uri> for every image and <dir>/manifest.json.
void write_synthetic_corpus(const SyntheticCorpus& corpus, const std::filesystem::path& dir);

}  // namespace wildscan
