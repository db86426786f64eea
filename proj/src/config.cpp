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

#include "wildscan/config.hpp"

#include <fstream>
#include <initializer_list>

#include "wildscan/common.hpp"

namespace wildscan {
namespace {

using nlohmann::json;
using nlohmann::ordered_json;

// Reads fields of one config section, naming the dotted path on errors.
class Section {
 public:
  Section(const json& doc, std::string name, std::initializer_list<const char*> keys)
      : doc_(doc), name_(std::move(name)) {
    if (!doc_.is_object()) throw ValidationError(name_, std::nullopt, "expected an object");
    for (const auto& [key, value] : doc_.items()) {
      bool known = false;
      for (const char* k : keys) known = known || key == k;
      if (!known) throw ValidationError(name_ + "." + key, std::nullopt, "unknown field");
    }
  }

  template <typename T>
  void read(const char* key, T& target) const {
    const auto it = doc_.find(key);
    if (it == doc_.end()) return;
    try {
      it->get_to(target);
    } catch (const json::exception& e) {
      throw ValidationError(name_ + "." + key, std::nullopt, e.what());
    }
  }

  void read_path(const char* key, std::filesystem::path& target) const {
    std::string text;
    if (!doc_.contains(key)) return;
    read(key, text);
    target = text;
  }

  bool has(const char* key) const { return doc_.contains(key); }

 private:
  const json& doc_;
  std::string name_;
};

const json& section_or_empty(const json& doc, const char* key) {
  static const json empty = json::object();
  const auto it = doc.find(key);
  return it == doc.end() ? empty : *it;
}

void resolve(std::filesystem::path& p, const std::filesystem::path& base) {
  if (!p.empty() && p.is_relative()) p = base / p;
}

}  // namespace

ordered_json loss_config_to_json(const LossConfig& config) {
  ordered_json j;
  j["classification_kind"] = to_string(config.classification_kind);
  j["gamma_pos"] = config.gamma_pos;
  j["gamma_neg"] = config.gamma_neg;
  j["margin"] = config.margin;
  j["regression_weight"] = config.regression_weight;
  j["smooth_l1_beta"] = config.smooth_l1_beta;
  return j;
}

LossConfig loss_config_from_json(const json& doc) {
  const Section s(doc, "loss",
                  {"classification_kind", "gamma_pos", "gamma_neg", "margin", "regression_weight",
                   "smooth_l1_beta"});
  LossConfig c;
  if (s.has("classification_kind")) {
    std::string kind;
    s.read("classification_kind", kind);
    c.classification_kind = parse_classification_kind(kind);
  }
  s.read("gamma_pos", c.gamma_pos);
  s.read("gamma_neg", c.gamma_neg);
  s.read("margin", c.margin);
  s.read("regression_weight", c.regression_weight);
  s.read("smooth_l1_beta", c.smooth_l1_beta);
  c.validate();
  return c;
}

ordered_json project_config_to_json(const ProjectConfig& config) {
  ordered_json j;
  j["detector"] = detector_config_to_json(config.detector);
  j["loss"] = loss_config_to_json(config.loss);
  j["schedule"] = {{"initial_lr", config.schedule.initial_lr},
                   {"escalation_factor", config.schedule.escalation_factor},
                   {"max_cycles", config.schedule.max_cycles},
                   {"batch_size", config.optimizer.batch_size},
                   {"momentum", config.optimizer.momentum},
                   {"horizontal_flip", config.optimizer.horizontal_flip},
                   {"max_grad_norm", config.optimizer.max_grad_norm}};
  j["policy"] = {{"patience", config.policy.patience},
                 {"min_improvement", config.policy.min_improvement},
                 {"max_epochs_per_cycle", config.policy.max_epochs_per_cycle}};
  j["seed"] = config.seed;
  j["paths"] = {{"manifest", config.paths.manifest.string()},
                {"images", config.paths.images.string()},
                {"out", config.paths.out.string()},
                {"checkpoint", config.paths.checkpoint.string()},
                {"pretrained", config.paths.pretrained.string()}};
  j["dedup"] = {{"threshold", config.dedup.threshold}};
  j["split"] = {{"train", config.split.fractions.train},
                {"val", config.split.fractions.val},
                {"test", config.split.fractions.test},
                {"require_every_part", config.split.require_every_part}};
  j["eval"] = {{"split", to_string(config.eval.split)},
               {"accuracy_score_threshold", config.eval.accuracy_score_threshold}};
  j["service"] = {{"class_names", config.service.class_names},
                  {"max_payload_bytes", config.service.max_payload_bytes},
                  {"max_input_side", config.service.max_input_side},
                  {"data_dir", config.service.data_dir.string()},
                  {"host", config.serve.host},
                  {"port", config.serve.port}};
  return j;
}

ProjectConfig project_config_from_json(const json& doc) {
  const Section top(doc, "config",
                    {"detector", "loss", "schedule", "policy", "seed", "paths", "dedup", "split",
                     "eval", "service"});
  ProjectConfig c;
  if (doc.contains("detector")) c.detector = detector_config_from_json(doc["detector"]);
  if (doc.contains("loss")) c.loss = loss_config_from_json(doc["loss"]);

  {
    const Section s(section_or_empty(doc, "schedule"), "schedule",
                    {"initial_lr", "escalation_factor", "max_cycles", "batch_size", "momentum",
                     "horizontal_flip", "max_grad_norm"});
    s.read("initial_lr", c.schedule.initial_lr);
    s.read("escalation_factor", c.schedule.escalation_factor);
    s.read("max_cycles", c.schedule.max_cycles);
    s.read("batch_size", c.optimizer.batch_size);
    s.read("momentum", c.optimizer.momentum);
    s.read("horizontal_flip", c.optimizer.horizontal_flip);
    s.read("max_grad_norm", c.optimizer.max_grad_norm);
    c.schedule.validate();
    c.optimizer.validate();
  }
  {
    const Section s(section_or_empty(doc, "policy"), "policy",
                    {"patience", "min_improvement", "max_epochs_per_cycle"});
    s.read("patience", c.policy.patience);
    s.read("min_improvement", c.policy.min_improvement);
    s.read("max_epochs_per_cycle", c.policy.max_epochs_per_cycle);
    c.policy.validate();
  }
  if (doc.contains("seed")) {
    try {
      doc["seed"].get_to(c.seed);
    } catch (const json::exception& e) {
      throw ValidationError("seed", std::nullopt, e.what());
    }
  }
  {
    const Section s(section_or_empty(doc, "paths"), "paths",
                    {"manifest", "images", "out", "checkpoint", "pretrained"});
    s.read_path("manifest", c.paths.manifest);
    s.read_path("images", c.paths.images);
    s.read_path("out", c.paths.out);
    s.read_path("checkpoint", c.paths.checkpoint);
    s.read_path("pretrained", c.paths.pretrained);
  }
  {
    const Section s(section_or_empty(doc, "dedup"), "dedup", {"threshold"});
    s.read("threshold", c.dedup.threshold);
    if (!(c.dedup.threshold > 0.0 && c.dedup.threshold <= 1.0)) {
      throw ValidationError("dedup.threshold", std::nullopt, "must be in (0, 1]");
    }
  }
  {
    const Section s(section_or_empty(doc, "split"), "split",
                    {"train", "val", "test", "require_every_part"});
    s.read("train", c.split.fractions.train);
    s.read("val", c.split.fractions.val);
    s.read("test", c.split.fractions.test);
    s.read("require_every_part", c.split.require_every_part);
  }
  {
    const Section s(section_or_empty(doc, "eval"), "eval", {"split", "accuracy_score_threshold"});
    if (s.has("split")) {
      std::string split;
      s.read("split", split);
      c.eval.split = parse_split(split);
    }
    s.read("accuracy_score_threshold", c.eval.accuracy_score_threshold);
    if (!(c.eval.accuracy_score_threshold >= 0.0 && c.eval.accuracy_score_threshold <= 1.0)) {
      throw ValidationError("eval.accuracy_score_threshold", std::nullopt, "must be in [0, 1]");
    }
  }
  {
    const Section s(section_or_empty(doc, "service"), "service",
                    {"class_names", "max_payload_bytes", "max_input_side", "data_dir", "host",
                     "port"});
    s.read("class_names", c.service.class_names);
    s.read("max_payload_bytes", c.service.max_payload_bytes);
    s.read("max_input_side", c.service.max_input_side);
    s.read_path("data_dir", c.service.data_dir);
    s.read("host", c.serve.host);
    s.read("port", c.serve.port);
  }
  return c;
}

ProjectConfig load_project_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config '" + path.string() + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw ValidationError("config", std::nullopt, e.what());
  }
  ProjectConfig config = project_config_from_json(doc);
  resolve_paths(config, path.parent_path());
  return config;
}

void resolve_paths(ProjectConfig& config, const std::filesystem::path& base) {
  resolve(config.paths.manifest, base);
  resolve(config.paths.images, base);
  resolve(config.paths.out, base);
  resolve(config.paths.checkpoint, base);
  resolve(config.paths.pretrained, base);
  resolve(config.service.data_dir, base);
}

}  // namespace wildscan
