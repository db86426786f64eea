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

#include "wildscan/image_source.hpp"

#include "wildscan/common.hpp"

namespace wildscan {

ImageLoader directory_loader(std::filesystem::path base_dir) {
  return [base = std::move(base_dir)](const ImageRecord& record) {
    const std::filesystem::path uri(record.uri);
    const auto path = uri.is_absolute() ? uri : base / uri;
    try {
      return read_image(path);
    } catch (const Error& e) {
      throw DecodeError("image '" + record.image_id + "': " + e.what());
    }
  };
}

ImageLoader memory_loader(const std::map<std::string, Image>& images) {
  return [&images](const ImageRecord& record) {
    const auto it = images.find(record.image_id);
    if (it == images.end()) throw NotFoundError("no pixels for image '" + record.image_id + "'");
    return it->second;
  };
}

}  // namespace wildscan
