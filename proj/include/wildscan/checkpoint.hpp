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
#include <string>

#include "json.hpp"
#include "wildscan/detector.hpp"

namespace wildscan {

inline constexpr int kCheckpointSchemaVersion = 1;

// A checkpoint is a binary weight blob plus a sidecar descriptor
// "<blob>.json" holding the detector config, class list, hashes and free-form
// metadata. The model version is the SHA-256 of the descriptor bytes.
struct CheckpointInfo {
  std::filesystem::path blob_path;
  std::filesystem::path descriptor_path;
  std::string model_version;
  nlohmann::ordered_json descriptor;
};

struct LoadedCheckpoint {
  Detector detector;
  CheckpointInfo info;
};

// Raw weight blob: magic, parameter count, then per parameter its name,
// shape and little-endian float64 values.
std::string serialize_weights(const nn::ParamStore& params);
void deserialize_weights(const std::string& bytes, nn::ParamStore& params);

// `metadata` must be an object; keep it free of timestamps so that saving
// the same weights twice yields the same descriptor.
CheckpointInfo save_checkpoint(const Detector& detector, const std::filesystem::path& blob_path,
                               const nlohmann::ordered_json& metadata = nlohmann::ordered_json::object());

// Accepts the blob path or the descriptor path. Throws ValidationError when
// the descriptor is malformed or a hash does not match.
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

// Copies every parameter of `blob_path` whose name and shape match into the
// detector (the pretrained-weights hook). Returns the number copied.
std::size_t import_weights(Detector& detector, const std::filesystem::path& blob_path);

std::string config_hash(const DetectorConfig& config);

}  // namespace wildscan
