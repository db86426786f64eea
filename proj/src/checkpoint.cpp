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

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "wildscan/common.hpp"

namespace wildscan {
namespace {

using nlohmann::json;
using nlohmann::ordered_json;

static_assert(std::endian::native == std::endian::little, "weight blobs assume little-endian");

constexpr char kMagic[8] = {'W', 'S', 'C', 'K', 'P', 'T', '0', '1'};
constexpr const char* kSchema = "wildscan.checkpoint";

struct NamedTensor {
  std::string name;
  nn::Matrix values;
};

void put_u32(std::string& out, std::uint32_t v) {
  char bytes[4];
  std::memcpy(bytes, &v, 4);
  out.append(bytes, 4);
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  void read(void* dst, std::size_t n) {
    if (pos_ + n > bytes_.size()) throw ValidationError("weights", std::nullopt, "truncated blob");
    std::memcpy(dst, bytes_.data() + pos_, n);
    pos_ += n;
  }
  std::uint32_t u32() {
    std::uint32_t v = 0;
    read(&v, 4);
    return v;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

std::vector<NamedTensor> parse_blob(const std::string& bytes) {
  Reader reader(bytes);
  char magic[8];
  reader.read(magic, 8);
  if (std::memcmp(magic, kMagic, 8) != 0) {
    throw ValidationError("weights", std::nullopt, "not a weight blob (bad magic)");
  }
  const std::uint32_t count = reader.u32();
  std::vector<NamedTensor> tensors;
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedTensor t;
    t.name.resize(reader.u32());
    reader.read(t.name.data(), t.name.size());
    const std::uint32_t rows = reader.u32();
    const std::uint32_t cols = reader.u32();
    t.values.resize(rows, cols);
    reader.read(t.values.data(), sizeof(double) * rows * cols);
    tensors.push_back(std::move(t));
  }
  if (!reader.done()) throw ValidationError("weights", std::nullopt, "trailing bytes after blob");
  return tensors;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("failed writing " + path.string());
}

std::string descriptor_text(const ordered_json& descriptor) { return descriptor.dump(2) + "\n"; }

}  // namespace

std::string config_hash(const DetectorConfig& config) {
  return sha256_hex(detector_config_to_json(config).dump());
}

std::string serialize_weights(const nn::ParamStore& params) {
  std::string out(kMagic, 8);
  put_u32(out, static_cast<std::uint32_t>(params.size()));
  for (nn::ParamId id = 0; id < params.size(); ++id) {
    const auto& name = params.name(id);
    const auto& values = params[id];
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    put_u32(out, static_cast<std::uint32_t>(values.rows()));
    put_u32(out, static_cast<std::uint32_t>(values.cols()));
    out.append(reinterpret_cast<const char*>(values.data()),
               sizeof(double) * static_cast<std::size_t>(values.size()));
  }
  return out;
}

void deserialize_weights(const std::string& bytes, nn::ParamStore& params) {
  auto tensors = parse_blob(bytes);
  if (tensors.size() != params.size()) {
    throw ValidationError("weights", std::nullopt,
                          "blob has " + std::to_string(tensors.size()) + " tensors, model has " +
                              std::to_string(params.size()));
  }
  for (nn::ParamId id = 0; id < params.size(); ++id) {
    const auto& t = tensors[id];
    if (t.name != params.name(id) || t.values.rows() != params[id].rows() ||
        t.values.cols() != params[id].cols()) {
      throw ValidationError("weights", id, "tensor '" + t.name + "' does not match '" +
                                               params.name(id) + "'");
    }
  }
  for (nn::ParamId id = 0; id < params.size(); ++id) params[id] = std::move(tensors[id].values);
}

CheckpointInfo save_checkpoint(const Detector& detector, const std::filesystem::path& blob_path,
                               const ordered_json& metadata) {
  if (!metadata.is_object()) throw Error("checkpoint metadata must be an object");
  const std::string blob = serialize_weights(detector.params());
  if (blob_path.has_parent_path()) std::filesystem::create_directories(blob_path.parent_path());
  write_file(blob_path, blob);

  const DetectorConfig& config = detector.config();
  ordered_json d;
  d["schema"] = kSchema;
  d["schema_version"] = kCheckpointSchemaVersion;
  d["blob"] = blob_path.filename().string();
  d["weights_sha256"] = sha256_hex(blob);
  d["config_sha256"] = config_hash(config);
  d["classes"] = config.class_names;
  d["backbone_profile"] = to_string(config.backbone_profile);
  d["detector_config"] = detector_config_to_json(config);
  d["metadata"] = metadata;

  CheckpointInfo info;
  info.blob_path = blob_path;
  info.descriptor_path = blob_path.string() + ".json";
  const std::string text = descriptor_text(d);
  write_file(info.descriptor_path, text);
  info.model_version = sha256_hex(text);
  info.descriptor = std::move(d);
  return info;
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  std::filesystem::path descriptor_path = path;
  if (path.extension() != ".json") descriptor_path = path.string() + ".json";
  const std::string text = read_file(descriptor_path);

  ordered_json d;
  try {
    d = ordered_json::parse(text);
  } catch (const json::exception& e) {
    throw ValidationError("checkpoint", std::nullopt, std::string("descriptor: ") + e.what());
  }
  auto field = [&](const char* key) -> const ordered_json& {
    if (!d.is_object() || !d.contains(key)) {
      throw ValidationError(std::string("checkpoint.") + key, std::nullopt, "missing");
    }
    return d.at(key);
  };
  if (field("schema") != kSchema) {
    throw ValidationError("checkpoint.schema", std::nullopt, "not a checkpoint descriptor");
  }
  if (field("schema_version") != kCheckpointSchemaVersion) {
    throw ValidationError("checkpoint.schema_version", std::nullopt, "unsupported version");
  }
  const DetectorConfig config = detector_config_from_json(json::parse(field("detector_config").dump()));
  if (field("config_sha256") != config_hash(config)) {
    throw ValidationError("checkpoint.config_sha256", std::nullopt, "config hash mismatch");
  }
  if (field("classes") != ordered_json(config.class_names)) {
    throw ValidationError("checkpoint.classes", std::nullopt, "class list disagrees with config");
  }
  const std::filesystem::path blob_path =
      descriptor_path.parent_path() / field("blob").get<std::string>();
  const std::string blob = read_file(blob_path);
  if (field("weights_sha256") != sha256_hex(blob)) {
    throw ValidationError("checkpoint.weights_sha256", std::nullopt,
                          "weights do not match the descriptor");
  }
  Detector detector(config);
  deserialize_weights(blob, detector.params());
  CheckpointInfo info{blob_path, descriptor_path, sha256_hex(text), std::move(d)};
  return LoadedCheckpoint{std::move(detector), std::move(info)};
}

std::size_t import_weights(Detector& detector, const std::filesystem::path& blob_path) {
  const auto tensors = parse_blob(read_file(blob_path));
  auto& params = detector.params();
  std::size_t copied = 0;
  for (nn::ParamId id = 0; id < params.size(); ++id) {
    for (const auto& t : tensors) {
      if (t.name == params.name(id) && t.values.rows() == params[id].rows() &&
          t.values.cols() == params[id].cols()) {
        params[id] = t.values;
        ++copied;
        break;
      }
    }
  }
  return copied;
}

}  // namespace wildscan
