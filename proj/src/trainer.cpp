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
#include "hsg/trainer.hpp"

#include <atomic>
#include <cmath>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

namespace hsg {

using nlohmann::json;

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0)) throw Error("TrainConfig: learning_rate must be >= 0");
  if (batch_size < 1) throw Error("TrainConfig: batch_size must be >= 1");
  if (epochs < 1) throw Error("TrainConfig: epochs must be >= 1");
  if (!(lr_decay_factor > 0.0)) throw Error("TrainConfig: lr_decay_factor must be > 0");
  if (!(temperature > 0.0)) throw Error("TrainConfig: temperature must be > 0");
  if (hidden_dim < 1) throw Error("TrainConfig: hidden_dim must be >= 1");
  if (negative_ratio < 0.0) throw Error("TrainConfig: negative_ratio must be >= 0");
  weights.validate();
  for (int e : lr_step_epochs)
    if (e < 1) throw Error("TrainConfig: lr_step_epochs entries are 1-based epochs");
}

double TrainConfig::lr_at_epoch(int epoch) const {
  int boundaries = 0;
  for (int e : lr_step_epochs)
    if (epoch >= e) ++boundaries;
  return learning_rate * std::pow(lr_decay_factor, boundaries);
}

std::string TrainConfig::to_json() const {
  json j;
  j["learning_rate"] = learning_rate;
  j["batch_size"] = batch_size;
  j["epochs"] = epochs;
  j["lr_decay_factor"] = lr_decay_factor;
  j["lr_step_epochs"] = lr_step_epochs;
  j["weights"] = {{"supercat", weights.supercat},
                  {"conditional", weights.conditional},
                  {"contrastive", weights.contrastive},
                  {"connectivity", weights.connectivity}};
  j["temperature"] = temperature;
  j["head"] = to_string(head);
  j["mode"] = to_string(mode);
  j["hidden_dim"] = hidden_dim;
  j["negative_ratio"] = negative_ratio;
  j["seed"] = seed;
  j["contrastive_scope"] = "batch";  // negatives span the whole batch
  return j.dump(2);
}

TrainConfig TrainConfig::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("train config: JSON parse error: ") + e.what());
  }
  TrainConfig c;
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.epochs = j.value("epochs", c.epochs);
  c.lr_decay_factor = j.value("lr_decay_factor", c.lr_decay_factor);
  if (j.contains("lr_step_epochs"))
    c.lr_step_epochs = j.at("lr_step_epochs").get<std::vector<int>>();
  if (j.contains("weights")) {
    const json& w = j.at("weights");
    c.weights.supercat = w.value("supercat", c.weights.supercat);
    c.weights.conditional = w.value("conditional", c.weights.conditional);
    c.weights.contrastive = w.value("contrastive", c.weights.contrastive);
    c.weights.connectivity = w.value("connectivity", c.weights.connectivity);
  }
  c.temperature = j.value("temperature", c.temperature);
  if (j.contains("head")) c.head = head_kind_from_string(j.at("head").get<std::string>());
  if (j.contains("mode")) c.mode = head_mode_from_string(j.at("mode").get<std::string>());
  c.hidden_dim = j.value("hidden_dim", c.hidden_dim);
  c.negative_ratio = j.value("negative_ratio", c.negative_ratio);
  c.seed = j.value("seed", c.seed);
  c.validate();
  return c;
}

TrainConfig TrainConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("train config: cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return from_json(buf.str());
}

namespace {

struct PositiveRef {
  int image = -1;
  int edge = -1;
};

ad::Var mean_of(ad::Tape& tape, const std::vector<ad::Var>& terms) {
  if (terms.empty()) return tape.scalar_input(0.0);
  ad::Var total = terms.front();
  for (std::size_t i = 1; i < terms.size(); ++i) total = ad::add(total, terms[i]);
  return ad::scale(total, 1.0 / static_cast<double>(terms.size()));
}

/// Ordered non-GT pair from the image, or nothing if the GT covers every pair.
std::optional<std::pair<int, int>> sample_negative_pair(const ImageRecord& img,
                                                        const std::set<std::pair<int, int>>& gt_pairs,
                                                        Rng& rng) {
  const int n = static_cast<int>(img.nodes.size());
  if (n < 2) return std::nullopt;
  const std::size_t all_pairs = static_cast<std::size_t>(n) * (n - 1);
  if (gt_pairs.size() >= all_pairs) return std::nullopt;
  for (int attempt = 0; attempt < 64; ++attempt) {
    const int i = rng.uniform_int(n);
    const int j = rng.uniform_int(n);
    if (i == j) continue;
    if (gt_pairs.count({i, j})) continue;
    return std::make_pair(i, j);
  }
  // Dense GT; fall back to a deterministic scan from a random start.
  const int start = rng.uniform_int(n * (n - 1));
  int idx = 0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      if (idx++ < start) continue;
      if (!gt_pairs.count({i, j})) return std::make_pair(i, j);
    }
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (i != j && !gt_pairs.count({i, j})) return std::make_pair(i, j);
  return std::nullopt;
}

}  // namespace

TrainResult train(const DatasetManifest& manifest, GridStore& grids,
                  const LabelSpace& space, const TrainConfig& config) {
  config.validate();
  manifest.validate(space);

  std::vector<PositiveRef> positives;
  std::vector<std::set<std::pair<int, int>>> gt_pairs(manifest.images.size());
  for (std::size_t im = 0; im < manifest.images.size(); ++im) {
    for (std::size_t e = 0; e < manifest.images[im].edges.size(); ++e)
      positives.push_back(PositiveRef{static_cast<int>(im), static_cast<int>(e)});
    for (const GtEdge& e : manifest.images[im].edges)
      gt_pairs[im].insert({e.subject, e.object});
  }
  if (positives.empty()) throw Error("train: manifest has no relationships");

  // All grids must share one geometry; it is recorded in the checkpoint.
  const FeatureGrid& first_grid = grids.get(manifest.images.front());
  const int C = first_grid.channels();
  const int H = first_grid.height;
  const int W = first_grid.width;
  for (const ImageRecord& img : manifest.images) {
    const FeatureGrid& g = grids.get(img);
    if (g.channels() != C || g.height != H || g.width != W)
      throw ShapeError("train: feature grids disagree on channels or extent");
  }

  Rng rng(config.seed);
  const int in_dim = assembly_input_dim(C, space);

  Checkpoint ckpt;
  ckpt.head = config.head;
  ckpt.mode = config.mode;
  ckpt.grid_channels = C;
  ckpt.grid_height = H;
  ckpt.grid_width = W;
  ckpt.train_config_json = config.to_json();
  ckpt.assembly = AssemblyParams::init(in_dim, config.hidden_dim, rng);
  if (config.head == HeadKind::bayes)
    ckpt.bayes_params = HeadParams::init(config.hidden_dim, space, rng);
  else
    ckpt.flat_params = FlatHeadParams::init(config.hidden_dim, space, rng);

  TrainResult result;
  int step = 0;
  std::vector<double> epoch_means;

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const double lr = config.lr_at_epoch(epoch);
    rng.shuffle(positives);
    double epoch_total = 0.0;
    int epoch_steps = 0;

    for (std::size_t begin = 0; begin < positives.size(); begin += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end =
          std::min(positives.size(), begin + static_cast<std::size_t>(config.batch_size));

      ad::Tape tape;
      ad::Var w_proj = tape.input(ckpt.assembly.w_proj);
      HeadParamVars bayes_vars;
      FlatParamVars flat_vars;
      if (config.head == HeadKind::bayes)
        bayes_vars = lift(tape, ckpt.bayes_params);
      else
        flat_vars = lift(tape, ckpt.flat_params);

      std::map<int, ad::Var> grid_leaves;
      auto grid_leaf = [&](int image) {
        auto it = grid_leaves.find(image);
        if (it != grid_leaves.end()) return it->second;
        const FeatureGrid& g = grids.get(manifest.images[static_cast<std::size_t>(image)]);
        return grid_leaves.emplace(image, tape.input(g.values)).first->second;
      };

      std::vector<ad::Var> supercat_terms, conditional_terms, connectivity_terms;
      std::vector<ad::Var> batch_hidden;
      std::vector<int> batch_labels;

      for (std::size_t bi = begin; bi < end; ++bi) {
        const PositiveRef ref = positives[bi];
        const ImageRecord& img = manifest.images[static_cast<std::size_t>(ref.image)];
        const GtEdge& edge = img.edges[static_cast<std::size_t>(ref.edge)];
        ad::Var x = assemble_edge(
            tape, grid_leaf(ref.image), H, W,
            img.nodes[static_cast<std::size_t>(edge.subject)].box,
            img.nodes[static_cast<std::size_t>(edge.object)].box,
            img.nodes[static_cast<std::size_t>(edge.subject)].category,
            img.nodes[static_cast<std::size_t>(edge.object)].category, space, w_proj);
        batch_hidden.push_back(x);
        batch_labels.push_back(edge.predicate.v);

        if (config.head == HeadKind::bayes) {
          HeadVars h = head_forward(x, bayes_vars, space, config.mode);
          supercat_terms.push_back(supercat_ce(h, space.super_of(edge.predicate)));
          conditional_terms.push_back(conditional_ce(h, edge.predicate, space));
          connectivity_terms.push_back(connectivity_bce(h.conn_logit, 1));
        } else {
          FlatVars f = flat_forward(x, flat_vars);
          conditional_terms.push_back(flat_ce(f, edge.predicate));
          connectivity_terms.push_back(connectivity_bce(f.conn_logit, 1));
        }
      }

      const int want_negatives = static_cast<int>(
          std::lround(config.negative_ratio * static_cast<double>(end - begin)));
      for (int k = 0; k < want_negatives; ++k) {
        const PositiveRef ref = positives[begin + static_cast<std::size_t>(k) % (end - begin)];
        const ImageRecord& img = manifest.images[static_cast<std::size_t>(ref.image)];
        const auto pair = sample_negative_pair(img, gt_pairs[static_cast<std::size_t>(ref.image)], rng);
        if (!pair) continue;
        ad::Var x = assemble_edge(
            tape, grid_leaf(ref.image), H, W,
            img.nodes[static_cast<std::size_t>(pair->first)].box,
            img.nodes[static_cast<std::size_t>(pair->second)].box,
            img.nodes[static_cast<std::size_t>(pair->first)].category,
            img.nodes[static_cast<std::size_t>(pair->second)].category, space, w_proj);
        if (config.head == HeadKind::bayes) {
          HeadVars h = head_forward(x, bayes_vars, space, config.mode);
          connectivity_terms.push_back(connectivity_bce(h.conn_logit, 0));
        } else {
          FlatVars f = flat_forward(x, flat_vars);
          connectivity_terms.push_back(connectivity_bce(f.conn_logit, 0));
        }
      }

      ad::Var supercat_mean = mean_of(tape, supercat_terms);
      ad::Var conditional_mean = mean_of(tape, conditional_terms);
      ad::Var connectivity_mean = mean_of(tape, connectivity_terms);
      ContrastiveResult contrastive_stats;
      ad::Var contrastive =
          (config.weights.contrastive > 0.0 && batch_hidden.size() >= 2)
              ? contrastive_loss(tape, batch_hidden, batch_labels, config.temperature,
                                 &contrastive_stats)
              : tape.scalar_input(0.0);

      ad::Var total = ad::add(
          ad::add(ad::scale(supercat_mean, config.weights.supercat),
                  ad::scale(conditional_mean, config.weights.conditional)),
          ad::add(ad::scale(contrastive, config.weights.contrastive),
                  ad::scale(connectivity_mean, config.weights.connectivity)));

      if (!std::isfinite(total.scalar()))
        throw NumericError("train: non-finite loss at step " + std::to_string(step) +
                           " (epoch " + std::to_string(epoch) + ")");
      tape.backward(total);

      ckpt.assembly.w_proj -= lr * w_proj.grad();
      if (config.head == HeadKind::bayes) {
        ckpt.bayes_params.w_conn -= lr * bayes_vars.conn.grad();
        ckpt.bayes_params.w_sup -= lr * bayes_vars.sup.grad();
        for (std::size_t s = 0; s < ckpt.bayes_params.w_sub.size(); ++s)
          ckpt.bayes_params.w_sub[s] -= lr * bayes_vars.sub[s].grad();
      } else {
        ckpt.flat_params.w_conn -= lr * flat_vars.conn.grad();
        ckpt.flat_params.w_flat -= lr * flat_vars.flat.grad();
      }

      StepRecord rec;
      rec.step = step++;
      rec.epoch = epoch;
      rec.lr = lr;
      rec.terms.supercat = supercat_mean.scalar();
      rec.terms.conditional = conditional_mean.scalar();
      rec.terms.contrastive = contrastive.scalar();
      rec.terms.connectivity = connectivity_mean.scalar();
      rec.total = total.scalar();
      epoch_total += rec.total;
      ++epoch_steps;
      result.history.push_back(rec);
    }
    epoch_means.push_back(epoch_steps > 0 ? epoch_total / epoch_steps : 0.0);
  }

  result.epoch_mean_loss_first = epoch_means.front();
  result.epoch_mean_loss_last = epoch_means.back();
  result.checkpoint = std::move(ckpt);
  return result;
}

void write_history_csv(const std::vector<StepRecord>& history,
                       const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("history: cannot open " + path.string() + " for writing");
  out << "step,epoch,lr,supercat,conditional,contrastive,connectivity,total\n";
  out.precision(17);
  for (const StepRecord& r : history)
    out << r.step << ',' << r.epoch << ',' << r.lr << ',' << r.terms.supercat << ','
        << r.terms.conditional << ',' << r.terms.contrastive << ','
        << r.terms.connectivity << ',' << r.total << "\n";
}

// ---------------------------------------------------------------------------
// Evaluation driver.
// ---------------------------------------------------------------------------

namespace {

std::vector<EntityNode> entities_for_task(const ImageRecord& record, Task task,
                                          bool* label_fallback) {
  std::vector<EntityNode> out;
  switch (task) {
    case Task::predcls:
      for (const GtNode& n : record.nodes) out.push_back(EntityNode{n.box, n.category});
      break;
    case Task::sgcls: {
      const bool aligned = record.detections.size() == record.nodes.size();
      if (!aligned && label_fallback != nullptr) *label_fallback = true;
      for (std::size_t i = 0; i < record.nodes.size(); ++i) {
        const ObjectCategoryId label =
            aligned ? record.detections[i].label : record.nodes[i].category;
        out.push_back(EntityNode{record.nodes[i].box, label});
      }
      break;
    }
    case Task::sgdet:
      if (record.detections.empty())
        throw Error("evaluate: sgdet requires detections in the manifest (image " +
                    record.id + ")");
      for (const DetectionRecord& d : record.detections)
        out.push_back(EntityNode{d.box, d.label});
      break;
  }
  return out;
}

}  // namespace

ImageForEval build_image_eval(const Checkpoint& ckpt, const ImageRecord& record,
                              const FeatureGrid& grid, const LabelSpace& space,
                              Task task, const EvalOptions& options,
                              bool* label_fallback) {
  if (grid.channels() != ckpt.grid_channels || grid.height != ckpt.grid_height ||
      grid.width != ckpt.grid_width)
    throw ShapeError("evaluate: grid geometry differs from the checkpoint");

  ImageForEval out;
  out.id = record.id;
  out.gt = record.gt();

  const std::vector<EntityNode> entities = entities_for_task(record, task, label_fallback);
  std::vector<EdgeScores> edges;
  const int n = static_cast<int>(entities.size());
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      const EdgeContext ctx =
          assemble_edge(grid, entities[static_cast<std::size_t>(i)].box,
                        entities[static_cast<std::size_t>(j)].box,
                        entities[static_cast<std::size_t>(i)].label,
                        entities[static_cast<std::size_t>(j)].label, space, ckpt.assembly);
      EdgeScores es;
      es.subject = i;
      es.object = j;
      if (ckpt.head == HeadKind::bayes) {
        const EdgePrediction pred =
            head_forward(ctx.hidden, ckpt.bayes_params, space, ckpt.mode);
        es.connectivity = pred.connectivity;
        es.joint = pred.joint_probs;
        es.super_probs = pred.super_probs;
      } else {
        const FlatPrediction pred = flat_forward(ctx.hidden, ckpt.flat_params);
        es.connectivity = pred.connectivity;
        es.joint = pred.probs;
      }
      edges.push_back(std::move(es));
    }
  }

  const CandidateRegime regime =
      ckpt.head == HeadKind::bayes ? CandidateRegime::per_super : CandidateRegime::single;
  const int pool_cap = std::max(
      1, static_cast<int>(edges.size()) *
             (regime == CandidateRegime::per_super ? space.num_supers() : 1));
  out.pool = rank_image(edges, entities, space, pool_cap, options.score_mode, regime);
  return out;
}

TaskReport evaluate_checkpoint(const Checkpoint& ckpt, const DatasetManifest& manifest,
                               GridStore& grids, const LabelSpace& space, Task task,
                               const EvalOptions& options) {
  manifest.validate(space);
  ckpt.validate(space);

  // Grid loading is sequential (the store caches); pool building can fan out.
  std::vector<const FeatureGrid*> grid_refs;
  grid_refs.reserve(manifest.images.size());
  for (const ImageRecord& img : manifest.images) grid_refs.push_back(&grids.get(img));

  std::vector<ImageForEval> images(manifest.images.size());
  std::atomic<bool> fallback{false};
  const int workers = std::max(1, options.workers);
  if (workers == 1) {
    bool fb = false;
    for (std::size_t i = 0; i < manifest.images.size(); ++i)
      images[i] = build_image_eval(ckpt, manifest.images[i], *grid_refs[i], space, task,
                                   options, &fb);
    fallback = fb;
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    std::exception_ptr error;
    std::mutex error_mutex;
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&]() {
        for (;;) {
          const std::size_t i = next.fetch_add(1);
          if (i >= manifest.images.size()) return;
          try {
            bool fb = false;
            images[i] = build_image_eval(ckpt, manifest.images[i], *grid_refs[i], space,
                                         task, options, &fb);
            if (fb) fallback = true;
          } catch (...) {
            std::lock_guard<std::mutex> lock(error_mutex);
            if (!error) error = std::current_exception();
            return;
          }
        }
      });
    }
    for (std::thread& t : pool) t.join();
    if (error) std::rethrow_exception(error);
  }

  TaskReport report = evaluate_task(images, options.ks, task, space,
                                    options.train_triplets, options.iou_threshold);
  report.label_fallback = fallback;
  return report;
}

std::vector<ImageForEval> images_from_external(
    const std::vector<ExternalPrediction>& records, const DatasetManifest& manifest,
    const LabelSpace& space, Task task, const EvalOptions& options,
    bool* label_fallback) {
  std::map<std::string, std::vector<const ExternalPrediction*>> by_image;
  for (const ExternalPrediction& r : records) by_image[r.image_id].push_back(&r);

  std::vector<ImageForEval> images;
  images.reserve(manifest.images.size());
  for (const ImageRecord& record : manifest.images) {
    ImageForEval img;
    img.id = record.id;
    img.gt = record.gt();
    const std::vector<EntityNode> entities =
        entities_for_task(record, task, label_fallback);

    std::vector<EdgeScores> edges;
    auto it = by_image.find(record.id);
    if (it != by_image.end()) {
      for (const ExternalPrediction* r : it->second) {
        if (r->subject < 0 || r->subject >= static_cast<int>(entities.size()) ||
            r->object < 0 || r->object >= static_cast<int>(entities.size()))
          throw ParseError("external logits: record for image " + record.id +
                           " references entity outside the task's node list");
        EdgeScores es;
        es.subject = r->subject;
        es.object = r->object;
        es.connectivity = r->prediction.connectivity;
        es.joint = r->prediction.joint_probs;
        es.super_probs = r->prediction.super_probs;
        edges.push_back(std::move(es));
      }
    }
    const int pool_cap = std::max(1, static_cast<int>(edges.size()) * space.num_supers());
    img.pool = rank_image(edges, entities, space, pool_cap, options.score_mode,
                          CandidateRegime::per_super);
    images.push_back(std::move(img));
  }
  return images;
}

}  // namespace hsg
