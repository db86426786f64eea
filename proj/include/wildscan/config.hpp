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
#include <string>

#include "json.hpp"
#include "wildscan/dataset.hpp"
#include "wildscan/dedup.hpp"
#include "wildscan/detector.hpp"
#include "wildscan/losses.hpp"
#include "wildscan/service.hpp"
#include "wildscan/training.hpp"

namespace wildscan {

struct PathsConfig {
  std::filesystem::path manifest = "manifest.json";
  // Base directory that image uris are resolved against; empty means the
  // manifest's directory.
  std::filesystem::path images;
  std::filesystem::path out = "out";
  std::filesystem::path checkpoint;
  // Optional pretrained weights imported by name and shape before training.
  std::filesystem::path pretrained;
};

struct DedupSettings {
  double threshold = kDefaultDuplicateThreshold;
};

struct SplitSettings {
  SplitFractions fractions;
  bool require_every_part = true;
};

struct EvalSettings {
  Split split = Split::test;
  // Score threshold for class_detection_accuracy; detections for mAP/mAR use
  // the model's own threshold.
  double accuracy_score_threshold = 0.5;
};

struct ServeSettings {
  std::string host = "127.0.0.1";
  int port = 8080;
};

// Everything the command-line tools read. One JSON file, one object per
// section; missing keys keep their defaults and unknown keys are rejected.
struct ProjectConfig {
  DetectorConfig detector;
  LossConfig loss;
  LRCycleSchedule schedule;
  OptimizerOptions optimizer;  // stored in the "schedule" section
  EarlyStopPolicy policy;
  std::uint64_t seed = 1;
  PathsConfig paths;
  DedupSettings dedup;
  SplitSettings split;
  EvalSettings eval;
  ServiceConfig service;
  ServeSettings serve;
};

nlohmann::ordered_json loss_config_to_json(const LossConfig& config);
LossConfig loss_config_from_json(const nlohmann::json& doc);

nlohmann::ordered_json project_config_to_json(const ProjectConfig& config);
// Relative paths are kept as written; resolve them with resolve_paths().
ProjectConfig project_config_from_json(const nlohmann::json& doc);
ProjectConfig load_project_config(const std::filesystem::path& path);

// Makes every relative path in `config` relative to `base`.
void resolve_paths(ProjectConfig& config, const std::filesystem::path& base);

}  // namespace wildscan
