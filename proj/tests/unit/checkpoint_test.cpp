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

#include "wildscan/checkpoint.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <iterator>

#include "wildscan/common.hpp"

namespace wildscan {
namespace {

namespace fs = std::filesystem;

DetectorConfig small_config() {
  DetectorConfig c;
  c.backbone_channels = {4, 6};
  c.feature_stride = 4;
  c.rpn_channels = 6;
  c.head_hidden = 8;
  c.roi_output_size = {2, 2};
  return c;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("wildscan_ckpt_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

TEST(CheckpointTest, SaveLoadReproducesWeightsAndOutputs) {
  const fs::path dir = scratch_dir("roundtrip");
  const Detector model(small_config(), 11);
  const CheckpointInfo info = save_checkpoint(model, dir / "model.ckpt", {{"note", "x"}});
  EXPECT_TRUE(fs::exists(info.descriptor_path));
  EXPECT_EQ(info.model_version.size(), 64u);

  const LoadedCheckpoint loaded = load_checkpoint(dir / "model.ckpt");
  EXPECT_EQ(loaded.info.model_version, info.model_version);
  ASSERT_EQ(loaded.detector.params().size(), model.params().size());
  for (nn::ParamId id = 0; id < model.params().size(); ++id) {
    EXPECT_EQ(loaded.detector.params()[id], model.params()[id]);
  }
  Image im(24, 20, 90);
  for (int x = 5; x < 15; ++x) im.at(x, 8, 1) = 250;
  EXPECT_EQ(loaded.detector.detect(im), model.detect(im));
  // The descriptor path itself is accepted too.
  EXPECT_EQ(load_checkpoint(info.descriptor_path).info.model_version, info.model_version);
}

TEST(CheckpointTest, SerializationIsExact) {
  const Detector model(small_config(), 2);
  Detector other(small_config(), 3);
  deserialize_weights(serialize_weights(model.params()), other.params());
  for (nn::ParamId id = 0; id < model.params().size(); ++id) {
    EXPECT_EQ(other.params()[id], model.params()[id]);
  }
  EXPECT_EQ(serialize_weights(other.params()), serialize_weights(model.params()));
}

TEST(CheckpointTest, TamperedBlobIsRejected) {
  const fs::path dir = scratch_dir("tamper");
  save_checkpoint(Detector(small_config(), 1), dir / "m.ckpt");
  {
    std::fstream f(dir / "m.ckpt", std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(-3, std::ios::end);
    f.put('\x7f');
  }
  try {
    load_checkpoint(dir / "m.ckpt");
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_EQ(e.field(), "checkpoint.weights_sha256");
  }
}

TEST(CheckpointTest, EditedConfigIsRejected) {
  const fs::path dir = scratch_dir("config");
  const CheckpointInfo info = save_checkpoint(Detector(small_config(), 1), dir / "m.ckpt");
  auto d = nlohmann::ordered_json::parse(slurp(info.descriptor_path));
  d["detector_config"]["score_threshold"] = 0.3;
  std::ofstream(info.descriptor_path) << d.dump(2);
  try {
    load_checkpoint(dir / "m.ckpt");
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_EQ(e.field(), "checkpoint.config_sha256");
  }
}

TEST(CheckpointTest, ConfigHashTracksEveryField) {
  DetectorConfig a = small_config();
  DetectorConfig b = a;
  EXPECT_EQ(config_hash(a), config_hash(b));
  b.detection_nms_iou = 0.45;
  EXPECT_NE(config_hash(a), config_hash(b));
}

TEST(CheckpointTest, ShapeMismatchIsRejected) {
  const Detector model(small_config(), 1);
  DetectorConfig wider = small_config();
  wider.head_hidden = 9;
  Detector other(wider, 1);
  EXPECT_THROW(deserialize_weights(serialize_weights(model.params()), other.params()), Error);
}

TEST(CheckpointTest, ImportCopiesMatchingTensorsOnly) {
  const fs::path dir = scratch_dir("import");
  const Detector source(small_config(), 4);
  save_checkpoint(source, dir / "src.ckpt");
  DetectorConfig wider = small_config();
  wider.head_hidden = 12;
  Detector target(wider, 9);
  const std::size_t copied = import_weights(target, dir / "src.ckpt");
  EXPECT_GT(copied, 0u);
  EXPECT_LT(copied, target.params().size());
  for (nn::ParamId id = 0; id < target.params().size(); ++id) {
    if (target.params().name(id).rfind("backbone", 0) == 0) {
      EXPECT_EQ(target.params()[id], source.params()[id]) << target.params().name(id);
    }
  }
}

TEST(CheckpointTest, MissingFileIsAnError) {
  EXPECT_THROW(load_checkpoint(scratch_dir("missing") / "nope.ckpt"), Error);
}

}  // namespace
}  // namespace wildscan
