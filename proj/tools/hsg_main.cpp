// Copyright 2026 The HSG Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//
// Command-line entry point: synthesize data, train, evaluate, rank,
// gradient-check, export graphs. Machine-readable results go to files or
// stdout; diagnostics go to stderr; the exit code is zero only on success.
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#include "hsg/dataset.hpp"
#include "hsg/gradcheck.hpp"
#include "hsg/report.hpp"
#include "hsg/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct DataPaths {
  fs::path manifest_path;
  fs::path base_dir;
};

DataPaths resolve_data(const std::string& data, const std::string& split) {
  DataPaths p;
  const fs::path given(data);
  if (fs::is_directory(given)) {
    p.manifest_path = given / (split + ".json");
    p.base_dir = given;
  } else {
    p.manifest_path = given;
    p.base_dir = given.parent_path();
  }
  if (!fs::exists(p.manifest_path))
    throw hsg::IoError("no manifest at " + p.manifest_path.string());
  return p;
}

hsg::LabelSpace resolve_hierarchy(const std::string& flag, const hsg::DatasetManifest& m,
                                  const fs::path& base_dir) {
  if (!flag.empty()) return hsg::LabelSpace::load(flag);
  if (!m.hierarchy_path.empty()) return hsg::LabelSpace::load(base_dir / m.hierarchy_path);
  throw hsg::Error("no hierarchy: pass --hierarchy or reference one from the manifest");
}

std::vector<int> parse_int_list(const std::string& csv, const char* what) {
  std::vector<int> out;
  std::size_t start = 0;
  while (start <= csv.size()) {
    const std::size_t comma = csv.find(',', start);
    const std::string tok = csv.substr(start, comma == std::string::npos
                                                  ? std::string::npos
                                                  : comma - start);
    if (!tok.empty()) {
      try {
        out.push_back(std::stoi(tok));
      } catch (...) {
        throw hsg::ParseError(std::string(what) + ": bad integer '" + tok + "'");
      }
    }
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  if (out.empty()) throw hsg::ParseError(std::string(what) + ": empty list");
  return out;
}

hsg::ScoreMode score_mode_from(const std::string& s) {
  if (s == "e_times_joint") return hsg::ScoreMode::e_times_joint;
  if (s == "joint") return hsg::ScoreMode::joint_only;
  if (s == "e_times_super") return hsg::ScoreMode::e_times_super;
  throw hsg::ParseError("unknown score mode '" + s +
                        "' (expected e_times_joint, joint, e_times_super)");
}

int run_synth(const std::string& spec_path, const std::string& out_dir) {
  hsg::SyntheticSpec spec;
  if (!spec_path.empty()) spec = hsg::SyntheticSpec::load(spec_path);
  const hsg::SyntheticData data = hsg::generate_synthetic(spec);
  hsg::write_synthetic(data, spec, out_dir);
  int train_edges = 0, test_edges = 0;
  for (const auto& img : data.train.images) train_edges += static_cast<int>(img.edges.size());
  for (const auto& img : data.test.images) test_edges += static_cast<int>(img.edges.size());
  std::cerr << "synth: wrote " << data.train.images.size() << " train / "
            << data.test.images.size() << " test images (" << train_edges << " / "
            << test_edges << " edges) to " << out_dir << "\n";
  return 0;
}

int run_train(const std::string& data, const std::string& hierarchy,
              const std::string& config_path, const std::string& out,
              const std::string& curves, const std::optional<double>& lr,
              const std::optional<int>& epochs, const std::optional<int>& batch,
              const std::optional<std::uint64_t>& seed, const std::string& head,
              const std::string& mode, const std::optional<int>& hidden_dim) {
  const DataPaths paths = resolve_data(data, "train");
  const hsg::DatasetManifest manifest = hsg::DatasetManifest::load(paths.manifest_path);
  const hsg::LabelSpace space = resolve_hierarchy(hierarchy, manifest, paths.base_dir);

  hsg::TrainConfig config;
  if (!config_path.empty()) config = hsg::TrainConfig::load(config_path);
  if (lr) config.learning_rate = *lr;
  if (epochs) config.epochs = *epochs;
  if (batch) config.batch_size = *batch;
  if (seed) config.seed = *seed;
  if (!head.empty()) config.head = hsg::head_kind_from_string(head);
  if (!mode.empty()) config.mode = hsg::head_mode_from_string(mode);
  if (hidden_dim) config.hidden_dim = *hidden_dim;
  config.validate();

  hsg::GridStore grids(paths.base_dir);
  const hsg::TrainResult result = hsg::train(manifest, grids, space, config);
  hsg::save_checkpoint(result.checkpoint, space, out);
  const fs::path curve_path = curves.empty() ? fs::path(out + ".csv") : fs::path(curves);
  hsg::write_history_csv(result.history, curve_path);
  std::cerr << "train: " << result.history.size() << " steps, epoch mean loss "
            << result.epoch_mean_loss_first << " -> " << result.epoch_mean_loss_last
            << "; checkpoint " << out << ", curves " << curve_path.string() << "\n";
  return 0;
}

int run_eval(const std::string& data, const std::string& split,
             const std::string& hierarchy, const std::string& ckpt,
             const std::string& logits, const std::string& tasks_csv,
             const std::string& ks_csv, const std::string& score_mode_name,
             const std::string& zero_shot, const std::string& report_path,
             const std::string& candidates_path, int workers, double iou_threshold) {
  if (ckpt.empty() == logits.empty())
    throw hsg::Error("eval: pass exactly one of --ckpt or --logits");
  const DataPaths paths = resolve_data(data, split);
  const hsg::DatasetManifest manifest = hsg::DatasetManifest::load(paths.manifest_path);
  const hsg::LabelSpace space = resolve_hierarchy(hierarchy, manifest, paths.base_dir);

  hsg::EvalOptions options;
  options.ks = parse_int_list(ks_csv, "--k");
  options.score_mode = score_mode_from(score_mode_name);
  options.iou_threshold = iou_threshold;
  options.workers = workers;
  if (!zero_shot.empty()) options.train_triplets = hsg::load_triplets(zero_shot, space);

  std::vector<std::string> task_names;
  {
    std::size_t start = 0;
    while (start <= tasks_csv.size()) {
      const std::size_t comma = tasks_csv.find(',', start);
      const std::string tok = tasks_csv.substr(
          start, comma == std::string::npos ? std::string::npos : comma - start);
      if (!tok.empty()) task_names.push_back(tok);
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
  }
  if (task_names.empty()) throw hsg::Error("eval: --tasks is empty");

  json echo;
  echo["command"] = "eval";
  echo["data"] = paths.manifest_path.string();
  echo["split"] = split;
  echo["tasks"] = task_names;
  echo["k"] = options.ks;
  echo["score_mode"] = score_mode_name;
  echo["iou_threshold"] = iou_threshold;
  echo["workers"] = workers;
  echo["zero_shot"] = zero_shot.empty() ? json(nullptr) : json(zero_shot);

  std::vector<hsg::TaskReport> reports;
  std::vector<hsg::ImageForEval> dump_images;
  if (!ckpt.empty()) {
    const hsg::Checkpoint checkpoint = hsg::load_checkpoint(ckpt, space);
    echo["checkpoint"] = ckpt;
    echo["train_config"] = json::parse(checkpoint.train_config_json);
    hsg::GridStore grids(paths.base_dir);
    for (const std::string& name : task_names) {
      const hsg::Task task = hsg::task_from_string(name);
      reports.push_back(
          hsg::evaluate_checkpoint(checkpoint, manifest, grids, space, task, options));
      if (!candidates_path.empty() && task == hsg::Task::predcls) {
        for (const auto& img : manifest.images)
          dump_images.push_back(hsg::build_image_eval(checkpoint, img, grids.get(img),
                                                      space, task, options));
      }
    }
  } else {
    const auto records = hsg::load_external_logits(logits, space);
    echo["logits"] = logits;
    for (const std::string& name : task_names) {
      const hsg::Task task = hsg::task_from_string(name);
      bool fallback = false;
      const auto images =
          hsg::images_from_external(records, manifest, space, task, options, &fallback);
      hsg::TaskReport report = hsg::evaluate_task(images, options.ks, task, space,
                                                  options.train_triplets,
                                                  options.iou_threshold);
      report.label_fallback = fallback;
      reports.push_back(std::move(report));
      if (!candidates_path.empty() && task == hsg::Task::predcls) dump_images = images;
    }
  }

  const std::string text = hsg::report_to_json(reports, space, echo.dump());
  if (report_path.empty()) {
    std::cout << text << "\n";
  } else {
    std::ofstream out(report_path, std::ios::trunc);
    if (!out) throw hsg::IoError("eval: cannot write " + report_path);
    out << text << "\n";
    std::cerr << "eval: report written to " << report_path << "\n";
  }
  if (!candidates_path.empty())
    hsg::write_candidates_jsonl(dump_images, space, candidates_path);
  return 0;
}

const hsg::ImageRecord& find_image(const hsg::DatasetManifest& manifest,
                                   const std::string& id) {
  for (const hsg::ImageRecord& img : manifest.images)
    if (img.id == id) return img;
  throw hsg::Error("image '" + id + "' not found in the manifest");
}

int run_rank(const std::string& data, const std::string& split,
             const std::string& hierarchy, const std::string& ckpt,
             const std::string& image_id, int top, const std::string& task_name,
             const std::string& score_mode_name) {
  const DataPaths paths = resolve_data(data, split);
  const hsg::DatasetManifest manifest = hsg::DatasetManifest::load(paths.manifest_path);
  const hsg::LabelSpace space = resolve_hierarchy(hierarchy, manifest, paths.base_dir);
  const hsg::Checkpoint checkpoint = hsg::load_checkpoint(ckpt, space);
  const hsg::ImageRecord& record = find_image(manifest, image_id);

  hsg::EvalOptions options;
  options.score_mode = score_mode_from(score_mode_name);
  hsg::GridStore grids(paths.base_dir);
  const hsg::Task task = hsg::task_from_string(task_name);
  const hsg::ImageForEval img =
      hsg::build_image_eval(checkpoint, record, grids.get(record), space, task, options);

  std::cout << "rank  score      subject            predicate          object\n";
  const int take = std::min<int>(top, static_cast<int>(img.pool.size()));
  for (int i = 0; i < take; ++i) {
    const hsg::Candidate& c = img.pool[static_cast<std::size_t>(i)];
    char line[256];
    std::snprintf(line, sizeof(line), "%-5d %-10.6f %d:%-16s %-18s %d:%-16s", i + 1,
                  c.score, c.subject, space.object_name(c.subject_label).c_str(),
                  space.predicate_name(c.predicate).c_str(), c.object,
                  space.object_name(c.object_label).c_str());
    std::cout << line << "\n";
  }
  return 0;
}

int run_gradcheck(std::uint64_t seed, int seeds, double eps, double threshold) {
  const double err = hsg::run_gradcheck(seed, seeds, eps);
  std::cout << "max_rel_err=" << err << " (seeds=" << seeds << ", eps=" << eps
            << ", threshold=" << threshold << ")\n";
  return err <= threshold ? 0 : 1;
}

int run_export_dot(const std::string& data, const std::string& split,
                   const std::string& hierarchy, const std::string& ckpt,
                   const std::string& image_id, int top, const std::string& out,
                   const std::string& task_name) {
  const DataPaths paths = resolve_data(data, split);
  const hsg::DatasetManifest manifest = hsg::DatasetManifest::load(paths.manifest_path);
  const hsg::LabelSpace space = resolve_hierarchy(hierarchy, manifest, paths.base_dir);
  const hsg::Checkpoint checkpoint = hsg::load_checkpoint(ckpt, space);
  const hsg::ImageRecord& record = find_image(manifest, image_id);

  hsg::EvalOptions options;
  hsg::GridStore grids(paths.base_dir);
  const hsg::Task task = hsg::task_from_string(task_name);
  const hsg::ImageForEval img =
      hsg::build_image_eval(checkpoint, record, grids.get(record), space, task, options);
  const std::string dot = export_dot(img, top, task, space);
  if (out.empty()) {
    std::cout << dot;
  } else {
    std::ofstream f(out, std::ios::trunc);
    if (!f) throw hsg::IoError("export-dot: cannot write " + out);
    f << dot;
    std::cerr << "export-dot: wrote " << out << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hierarchical scene-graph relationship head: data synthesis, "
               "training, and evaluation"};
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset");
  std::string synth_spec, synth_out;
  synth->add_option("--spec", synth_spec, "Synthetic spec JSON (defaults when omitted)");
  synth->add_option("--out", synth_out, "Output directory")->required();

  // train
  auto* train = app.add_subcommand("train", "Train a head on a dataset");
  std::string train_data, train_hierarchy, train_config, train_out, train_curves;
  std::string train_head, train_mode;
  std::optional<double> train_lr;
  std::optional<int> train_epochs, train_batch, train_hidden;
  std::optional<std::uint64_t> train_seed;
  train->add_option("--data", train_data, "Dataset directory or manifest path")->required();
  train->add_option("--hierarchy", train_hierarchy, "Hierarchy JSON (overrides manifest)");
  train->add_option("--config", train_config, "Train config JSON");
  train->add_option("--out", train_out, "Checkpoint output path")->required();
  train->add_option("--curves", train_curves, "Training-curve CSV (default <out>.csv)");
  train->add_option("--lr", train_lr, "Override learning rate");
  train->add_option("--epochs", train_epochs, "Override epoch count");
  train->add_option("--batch", train_batch, "Override batch size");
  train->add_option("--seed", train_seed, "Override seed");
  train->add_option("--head", train_head, "bayes or flat");
  train->add_option("--mode", train_mode, "bayes_consistent or literal_eq3");
  train->add_option("--hidden-dim", train_hidden, "Override hidden dimension");

  // eval
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint or external logits");
  std::string eval_data, eval_split = "test", eval_hierarchy, eval_ckpt, eval_logits;
  std::string eval_tasks = "predcls", eval_ks = "20,50,100";
  std::string eval_score = "e_times_joint", eval_zero_shot, eval_report, eval_candidates;
  int eval_workers = 1;
  double eval_iou = 0.5;
  eval->add_option("--data", eval_data, "Dataset directory or manifest path")->required();
  eval->add_option("--split", eval_split, "Manifest to use when --data is a directory");
  eval->add_option("--hierarchy", eval_hierarchy, "Hierarchy JSON (overrides manifest)");
  eval->add_option("--ckpt", eval_ckpt, "Checkpoint path");
  eval->add_option("--logits", eval_logits, "External predictions (JSON lines)");
  eval->add_option("--tasks", eval_tasks, "Comma list: predcls,sgcls,sgdet");
  eval->add_option("--k", eval_ks, "Comma list of k values");
  eval->add_option("--score-mode", eval_score, "e_times_joint, joint, e_times_super");
  eval->add_option("--zero-shot", eval_zero_shot, "Train-triplet JSON for zsR@k");
  eval->add_option("--report", eval_report, "Report JSON path (stdout when omitted)");
  eval->add_option("--candidates", eval_candidates, "Candidate dump (JSON lines)");
  eval->add_option("--workers", eval_workers, "Parallel image workers");
  eval->add_option("--iou", eval_iou, "SGDET IoU threshold");

  // rank
  auto* rank = app.add_subcommand("rank", "Print an image's top candidates");
  std::string rank_data, rank_split = "test", rank_hierarchy, rank_ckpt, rank_image;
  std::string rank_task = "predcls", rank_score = "e_times_joint";
  int rank_top = 10;
  rank->add_option("--data", rank_data, "Dataset directory or manifest path")->required();
  rank->add_option("--split", rank_split, "Manifest to use when --data is a directory");
  rank->add_option("--hierarchy", rank_hierarchy, "Hierarchy JSON (overrides manifest)");
  rank->add_option("--ckpt", rank_ckpt, "Checkpoint path")->required();
  rank->add_option("--image", rank_image, "Image id")->required();
  rank->add_option("--top", rank_top, "Rows to print");
  rank->add_option("--task", rank_task, "predcls, sgcls, sgdet");
  rank->add_option("--score-mode", rank_score, "Ranking score mode");

  // gradcheck
  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference gradient audit");
  std::uint64_t gc_seed = 1;
  int gc_seeds = 10;
  double gc_eps = 1e-6, gc_threshold = 1e-4;
  gradcheck->add_option("--seed", gc_seed, "Base seed");
  gradcheck->add_option("--seeds", gc_seeds, "Number of seeds");
  gradcheck->add_option("--eps", gc_eps, "Central-difference step");
  gradcheck->add_option("--threshold", gc_threshold, "Failure threshold");

  // export-dot
  auto* export_dot_cmd = app.add_subcommand("export-dot", "Write a DOT scene graph");
  std::string dot_data, dot_split = "test", dot_hierarchy, dot_ckpt, dot_image, dot_out;
  std::string dot_task = "predcls";
  int dot_top = 5;
  export_dot_cmd->add_option("--data", dot_data, "Dataset directory or manifest path")
      ->required();
  export_dot_cmd->add_option("--split", dot_split, "Manifest to use");
  export_dot_cmd->add_option("--hierarchy", dot_hierarchy, "Hierarchy JSON");
  export_dot_cmd->add_option("--ckpt", dot_ckpt, "Checkpoint path")->required();
  export_dot_cmd->add_option("--image", dot_image, "Image id")->required();
  export_dot_cmd->add_option("--top", dot_top, "Candidates to draw");
  export_dot_cmd->add_option("--out", dot_out, "Output path (stdout when omitted)");
  export_dot_cmd->add_option("--task", dot_task, "predcls, sgcls, sgdet");

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) return run_synth(synth_spec, synth_out);
    if (train->parsed())
      return run_train(train_data, train_hierarchy, train_config, train_out, train_curves,
                       train_lr, train_epochs, train_batch, train_seed, train_head,
                       train_mode, train_hidden);
    if (eval->parsed())
      return run_eval(eval_data, eval_split, eval_hierarchy, eval_ckpt, eval_logits,
                      eval_tasks, eval_ks, eval_score, eval_zero_shot, eval_report,
                      eval_candidates, eval_workers, eval_iou);
    if (rank->parsed())
      return run_rank(rank_data, rank_split, rank_hierarchy, rank_ckpt, rank_image,
                      rank_top, rank_task, rank_score);
    if (gradcheck->parsed()) return run_gradcheck(gc_seed, gc_seeds, gc_eps, gc_threshold);
    if (export_dot_cmd->parsed())
      return run_export_dot(dot_data, dot_split, dot_hierarchy, dot_ckpt, dot_image,
                            dot_top, dot_out, dot_task);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
