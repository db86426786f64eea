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

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "wildscan/checkpoint.hpp"
#include "wildscan/common.hpp"
#include "wildscan/config.hpp"
#include "wildscan/dataset.hpp"
#include "wildscan/dedup.hpp"
#include "wildscan/explain.hpp"
#include "wildscan/image.hpp"
#include "wildscan/image_source.hpp"
#include "wildscan/metrics.hpp"
#include "wildscan/service.hpp"
#include "wildscan/synth.hpp"
#include "wildscan/training.hpp"

namespace fs = std::filesystem;
using namespace wildscan;
using nlohmann::ordered_json;

namespace {

struct CommonOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
};

void add_common(CLI::App* cmd, CommonOptions& opts) {
  cmd->add_option("--config", opts.config, "Project config file (JSON)");
  cmd->add_option("--seed", opts.seed, "Override the config seed");
  cmd->add_option("--out", opts.out, "Output directory");
}

ProjectConfig resolve_config(const CommonOptions& opts) {
  ProjectConfig config;
  if (!opts.config.empty()) {
    config = load_project_config(opts.config);
  } else {
    resolve_paths(config, fs::current_path());
  }
  if (opts.seed) config.seed = *opts.seed;
  if (!opts.out.empty()) config.paths.out = opts.out;
  fs::create_directories(config.paths.out);
  return config;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw Error("cannot write '" + path.string() + "'");
}

void write_json(const fs::path& path, const ordered_json& doc) {
  write_text(path, doc.dump(2) + "\n");
}

ImageLoader loader_for(const ProjectConfig& config) {
  const fs::path base =
      config.paths.images.empty() ? config.paths.manifest.parent_path() : config.paths.images;
  return directory_loader(base);
}

DatasetManifest without_images(const DatasetManifest& manifest, const std::set<std::string>& drop) {
  DatasetManifest out;
  out.taxonomy = manifest.taxonomy;
  for (const auto& image : manifest.images) {
    if (!drop.count(image.image_id)) out.images.push_back(image);
  }
  for (const auto& a : manifest.annotations) {
    if (!drop.count(a.image_id)) out.annotations.push_back(a);
  }
  for (const auto& [id, split] : manifest.splits) {
    if (!drop.count(id)) out.splits.emplace(id, split);
  }
  return out;
}

fs::path checkpoint_or(const ProjectConfig& config, const std::string& override_path) {
  fs::path path = override_path.empty() ? config.paths.checkpoint : fs::path(override_path);
  if (path.empty()) throw ValidationError("paths.checkpoint", std::nullopt, "no checkpoint given");
  return path;
}

int run_synth(const CommonOptions& opts, SynthOptions synth) {
  ProjectConfig config = resolve_config(opts);
  synth.seed = config.seed;
  // Object sizes keep the default proportions (40..72 px at 128 px).
  synth.min_object_size = std::max(4, synth.image_size * 5 / 16);
  synth.max_object_size = std::max(synth.min_object_size, synth.image_size * 9 / 16);
  const SyntheticCorpus corpus = generate_synthetic_corpus(synth);
  write_synthetic_corpus(corpus, config.paths.out);
  std::cout << "wrote " << corpus.manifest.images.size() << " images to "
            << config.paths.out.string() << "\n";
  return 0;
}

int run_dedup(const CommonOptions& opts) {
  const ProjectConfig config = resolve_config(opts);
  const DatasetManifest manifest = load_manifest(config.paths.manifest);
  const auto items = embed_manifest(manifest, loader_for(config));
  const DedupReport report = find_duplicates(items, config.dedup.threshold);
  write_json(config.paths.out / "dedup_report.json", dedup_report_to_json(report));
  write_text(config.paths.out / "review_queue.csv", review_queue_csv(report));
  save_manifest(without_images(manifest, report.removed), config.paths.out / "manifest.dedup.json");
  std::cout << report.duplicates.size() << " duplicate pairs, " << report.conflicts.size()
            << " conflicts, " << report.removed.size() << " images removed\n";
  return 0;
}

int run_split(const CommonOptions& opts) {
  const ProjectConfig config = resolve_config(opts);
  const DatasetManifest manifest = load_manifest(config.paths.manifest);
  SplitOptions split_options;
  split_options.require_every_part = config.split.require_every_part;
  const DatasetManifest split =
      split_dataset(manifest, config.split.fractions, config.seed, split_options);
  save_manifest(split, config.paths.out / "manifest.split.json");
  for (const Split s : {Split::train, Split::val, Split::test}) {
    std::cout << to_string(s) << ": " << split.images_in(s).size() << "\n";
  }
  return 0;
}

int run_train(const CommonOptions& opts) {
  const ProjectConfig config = resolve_config(opts);
  const DatasetManifest manifest = load_manifest(config.paths.manifest);
  FitOptions fit_options;
  fit_options.optimizer = config.optimizer;
  fit_options.checkpoint_path = config.paths.out / "model.ckpt";
  fit_options.on_epoch = [](const EpochRecord& e) {
    std::printf("epoch %d  cycle %d  lr %g  loss %.4f  val mAP_50 %.4f%s\n", e.epoch, e.cycle,
                e.lr, e.train_loss.total, e.validation_map_50, e.improved ? "  *" : "");
    std::fflush(stdout);
  };
  if (!config.paths.pretrained.empty()) fit_options.pretrained_weights = config.paths.pretrained;
  const FitResult result = fit(manifest, loader_for(config), config.detector, config.loss,
                               config.schedule, config.policy, config.seed, fit_options);
  write_json(config.paths.out / "train_report.json", train_report_to_json(result.report));
  write_text(config.paths.out / "train_report.csv", train_report_csv(result.report));
  std::cout << "best epoch " << result.report.best_epoch << ", validation mAP_50 "
            << result.report.best_metric << ", stopped: "
            << to_string(result.report.stopping_reason) << "\n";
  return 0;
}

int run_eval(const CommonOptions& opts, const std::string& checkpoint, const std::string& label,
             const std::vector<std::string>& compare) {
  const ProjectConfig config = resolve_config(opts);
  const DatasetManifest manifest = load_manifest(config.paths.manifest);
  const LoadedCheckpoint loaded = load_checkpoint(checkpoint_or(config, checkpoint));
  const auto& names = loaded.detector.config().class_names;
  const std::optional<Split> split =
      manifest.splits.empty() ? std::nullopt : std::optional<Split>(config.eval.split);
  const auto detections = run_detector(loaded.detector, manifest, split, loader_for(config));
  const auto inputs = eval_inputs(manifest, split, detections, names);
  const EvalReport report = build_eval_report(inputs, names, config.eval.accuracy_score_threshold);
  write_json(config.paths.out / "detections.json", detections_to_json(detections, names));
  write_json(config.paths.out / "eval_report.json", eval_report_to_json(report));

  std::vector<LabeledReport> reports{{label, report}};
  for (const auto& entry : compare) {
    const auto eq = entry.find('=');
    if (eq == std::string::npos) {
      throw ValidationError("--compare", std::nullopt, "expected LABEL=REPORT.json");
    }
    std::ifstream in(entry.substr(eq + 1));
    if (!in) throw Error("cannot open '" + entry.substr(eq + 1) + "'");
    reports.emplace_back(entry.substr(0, eq), eval_report_from_json(nlohmann::json::parse(in)));
  }
  const std::string table = format_comparison_table(reports);
  write_text(config.paths.out / "comparison.txt", table);
  write_text(config.paths.out / "comparison.csv", format_comparison_csv(reports));
  std::cout << table;
  return 0;
}

int run_gradcam(const CommonOptions& opts, const std::string& checkpoint, const std::string& image,
                std::optional<std::size_t> detection, const std::string& class_name,
                double alpha) {
  const ProjectConfig config = resolve_config(opts);
  const LoadedCheckpoint loaded = load_checkpoint(checkpoint_or(config, checkpoint));
  const auto& names = loaded.detector.config().class_names;
  CamTarget target = CamTarget::detection(detection.value_or(0));
  if (!class_name.empty()) {
    const auto it = std::find(names.begin(), names.end(), class_name);
    if (it == names.end()) throw ValidationError("--class", std::nullopt, "unknown class");
    target = CamTarget::for_class(static_cast<int>(it - names.begin()));
  }
  const Image pixels = read_image(image);
  const std::string stem = fs::path(image).stem().string();
  const CamMap cam = compute_cam(pixels, loaded.detector, target, stem);
  write_pgm(cam.heat, cam.width, cam.height, config.paths.out / (stem + ".cam.pgm"));
  write_png(render_overlay(pixels, cam, alpha), config.paths.out / (stem + ".overlay.png"));
  write_json(config.paths.out / (stem + ".cam.json"), cam_metadata(cam, names));
  std::cout << "class " << names.at(static_cast<std::size_t>(cam.target_class))
            << (cam.all_zero ? " (all-zero map)" : "") << "\n";
  return 0;
}

int run_serve(const CommonOptions& opts, const std::string& checkpoint, std::string host,
              int port) {
  const ProjectConfig config = resolve_config(opts);
  InferenceService service(config.service);
  const fs::path path = checkpoint.empty() ? config.paths.checkpoint : fs::path(checkpoint);
  if (!path.empty()) std::cout << "model " << service.load_model(path) << "\n";
  if (host.empty()) host = config.serve.host;
  if (port == 0) port = config.serve.port;
  HttpServer server(service);
  std::cout << "listening on " << host << ":" << port << "\n" << std::flush;
  if (!server.listen(host, port)) throw Error("cannot bind " + host + ":" + std::to_string(port));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Wildlife product detection toolkit"};
  app.require_subcommand(1);

  CommonOptions synth_opts, dedup_opts, split_opts, train_opts, eval_opts, cam_opts, serve_opts;
  SynthOptions synth;
  auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic image corpus");
  add_common(synth_cmd, synth_opts);
  synth_cmd->add_option("--images-per-class", synth.images_per_class);
  synth_cmd->add_option("--image-size", synth.image_size);

  auto* dedup_cmd = app.add_subcommand("dedup", "Flag duplicate images and category conflicts");
  add_common(dedup_cmd, dedup_opts);

  auto* split_cmd = app.add_subcommand("split", "Stratified train/val/test split");
  add_common(split_cmd, split_opts);

  auto* train_cmd = app.add_subcommand("train", "Train a detector");
  add_common(train_cmd, train_opts);

  std::string eval_checkpoint, eval_label = "model";
  std::vector<std::string> compare;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint");
  add_common(eval_cmd, eval_opts);
  eval_cmd->add_option("--checkpoint", eval_checkpoint);
  eval_cmd->add_option("--label", eval_label, "Row label in the comparison table");
  eval_cmd->add_option("--compare", compare, "Extra rows as LABEL=eval_report.json");

  std::string cam_checkpoint, cam_image, cam_class;
  std::optional<std::size_t> cam_detection;
  double cam_alpha = 0.5;
  auto* cam_cmd = app.add_subcommand("gradcam", "Grad-CAM heat map for one image");
  add_common(cam_cmd, cam_opts);
  cam_cmd->add_option("--checkpoint", cam_checkpoint);
  cam_cmd->add_option("--image", cam_image)->required()->check(CLI::ExistingFile);
  auto* det_opt = cam_cmd->add_option("--detection", cam_detection, "Detection index");
  cam_cmd->add_option("--class", cam_class, "Target class name")->excludes(det_opt);
  cam_cmd->add_option("--alpha", cam_alpha)->check(CLI::Range(0.0, 1.0));

  std::string serve_checkpoint, serve_host;
  int serve_port = 0;
  auto* serve_cmd = app.add_subcommand("serve", "Run the HTTP inference service");
  add_common(serve_cmd, serve_opts);
  serve_cmd->add_option("--checkpoint", serve_checkpoint);
  serve_cmd->add_option("--host", serve_host);
  serve_cmd->add_option("--port", serve_port);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*synth_cmd) return run_synth(synth_opts, synth);
    if (*dedup_cmd) return run_dedup(dedup_opts);
    if (*split_cmd) return run_split(split_opts);
    if (*train_cmd) return run_train(train_opts);
    if (*eval_cmd) return run_eval(eval_opts, eval_checkpoint, eval_label, compare);
    if (*cam_cmd) {
      return run_gradcam(cam_opts, cam_checkpoint, cam_image, cam_detection, cam_class, cam_alpha);
    }
    if (*serve_cmd) return run_serve(serve_opts, serve_checkpoint, serve_host, serve_port);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
