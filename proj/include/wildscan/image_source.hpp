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

#include <filesystem>
#include <functional>
#include <map>
#include <string>

#include "wildscan/dataset.hpp"
#include "wildscan/image.hpp"

namespace wildscan {

// Resolves a manifest record to pixels.
using ImageLoader = std::function<Image(const ImageRecord&)>;

// Reads `uri` relative to `base_dir` (absolute uris are used as is).
// Decode failures are rethrown as DecodeError naming the image_id.
ImageLoader directory_loader(std::filesystem::path base_dir);

// Looks images up by image_id; the map must outlive the loader.
ImageLoader memory_loader(const std::map<std::string, Image>& images);

}  // namespace wildscan
