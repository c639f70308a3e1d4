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
#include "hsg/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "hsg/rng.hpp"
#include "hsg/tensor_io.hpp"

namespace hsg {

using nlohmann::json;

namespace {

json parse_file(const std::filesystem::path& path, const char* what) {
  std::ifstream in(path);
  if (!in) throw IoError(std::string(what) + ": cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError(std::string(what) + ": JSON parse error in " + path.string() +
                     ": " + e.what());
  }
}

json box_to_json(const BoundingBox& b) {
  return json::array({b.x_min, b.y_min, b.x_max, b.y_max});
}

BoundingBox box_from_json(const json& j, const char* what) {
  if (!j.is_array() || j.size() != 4)
    throw ParseError(std::string(what) + ": box must be [x_min,y_min,x_max,y_max]");
  BoundingBox b{j[0].get<double>(), j[1].get<double>(), j[2].get<double>(),
                j[3].get<double>()};
  if (!b.valid()) throw ParseError(std::string(what) + ": degenerate box");
  return b;
}

}  // namespace

void DatasetManifest::validate(const LabelSpace& space) const {
  if (split != "train" && split != "test")
    throw ParseError("manifest: split must be 'train' or 'test', got '" + split + "'");
  for (const ImageRecord& img : images) {
    img.gt().validate(space);
    for (const DetectionRecord& d : img.detections) {
      d.box.validate();
      if (d.label.v < 0 || d.label.v >= space.num_objects())
        throw ParseError("manifest: detection label out of range in image " + img.id);
    }
  }
}

void DatasetManifest::save(const std::filesystem::path& path) const {
  json j;
  j["split"] = split;
  j["hierarchy"] = hierarchy_path;
  j["config"] = json::parse(config_json);
  json imgs = json::array();
  for (const ImageRecord& img : images) {
    json ji;
    ji["id"] = img.id;
    ji["width"] = img.width;
    ji["height"] = img.height;
    if (!img.grid_path.empty()) ji["grid"] = img.grid_path;
    json nodes = json::array();
    for (const GtNode& n : img.nodes)
      nodes.push_back({{"box", box_to_json(n.box)}, {"category", n.category.v}});
    ji["nodes"] = nodes;
    json edges = json::array();
    for (const GtEdge& e : img.edges)
      edges.push_back(json::array({e.subject, e.object, e.predicate.v}));
    ji["edges"] = edges;
    if (!img.detections.empty()) {
      json dets = json::array();
      for (const DetectionRecord& d : img.detections)
        dets.push_back({{"box", box_to_json(d.box)},
                        {"label", d.label.v},
                        {"score", d.score}});
      ji["detections"] = dets;
    }
    ji["no_relationships"] = img.no_relationships;
    imgs.push_back(std::move(ji));
  }
  j["images"] = imgs;
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("manifest: cannot open " + path.string() + " for writing");
  out << j.dump(2) << "\n";
}

DatasetManifest DatasetManifest::load(const std::filesystem::path& path) {
  const json j = parse_file(path, "manifest");
  if (!j.is_object()) throw ParseError("manifest: top level must be an object");
  DatasetManifest m;
  m.split = j.value("split", std::string());
  m.hierarchy_path = j.value("hierarchy", std::string());
  if (j.contains("config")) m.config_json = j.at("config").dump();
  if (!j.contains("images") || !j.at("images").is_array())
    throw ParseError("manifest: missing 'images' array");
  for (const json& ji : j.at("images")) {
    ImageRecord img;
    img.id = ji.at("id").get<std::string>();
    img.width = ji.value("width", 1);
    img.height = ji.value("height", 1);
    img.grid_path = ji.value("grid", std::string());
    for (const json& jn : ji.value("nodes", json::array())) {
      GtNode n;
      n.box = box_from_json(jn.at("box"), "manifest node");
      n.category = ObjectCategoryId(jn.at("category").get<int>());
      img.nodes.push_back(n);
    }
    for (const json& je : ji.value("edges", json::array())) {
      if (!je.is_array() || je.size() != 3)
        throw ParseError("manifest: edge must be [subject, object, predicate]");
      GtEdge e;
      e.subject = je[0].get<int>();
      e.object = je[1].get<int>();
      e.predicate = PredicateId(je[2].get<int>());
      img.edges.push_back(e);
    }
    for (const json& jd : ji.value("detections", json::array())) {
      DetectionRecord d;
      d.box = box_from_json(jd.at("box"), "manifest detection");
      d.label = ObjectCategoryId(jd.at("label").get<int>());
      d.score = jd.value("score", 1.0);
      img.detections.push_back(d);
    }
    img.no_relationships = ji.value("no_relationships", img.edges.empty());
    m.images.push_back(std::move(img));
  }
  return m;
}

GridStore GridStore::in_memory(std::map<std::string, FeatureGrid> grids) {
  GridStore s;
  s.cache_ = std::move(grids);
  return s;
}

const FeatureGrid& GridStore::get(const ImageRecord& record) {
  auto it = cache_.find(record.id);
  if (it != cache_.end()) return it->second;
  if (record.grid_path.empty())
    throw IoError("grid store: image '" + record.id + "' has no grid");
  FeatureGrid g = load_grid(base_ / record.grid_path);
  return cache_.emplace(record.id, std::move(g)).first->second;
}

// ---------------------------------------------------------------------------
// VG-style parsing.
// ---------------------------------------------------------------------------

DatasetManifest parse_vg_annotations(const std::filesystem::path& objects_file,
                                     const std::filesystem::path& relationships_file,
                                     const LabelSpace& space, VgParseStats* stats) {
  const json jobj = parse_file(objects_file, "vg objects");
  const json jrel = parse_file(relationships_file, "vg relationships");
  if (!jobj.is_array()) throw ParseError("vg objects: top level must be an array");
  if (!jrel.is_array()) throw ParseError("vg relationships: top level must be an array");

  VgParseStats local;
  VgParseStats& st = stats != nullptr ? *stats : local;
  st = VgParseStats{};

  DatasetManifest manifest;
  manifest.split = "test";

  // image id -> (object_id -> node index or -1 when filtered)
  std::map<std::string, std::map<std::int64_t, int>> node_index;
  std::map<std::string, std::size_t> image_index;

  for (const json& ji : jobj) {
    ImageRecord img;
    img.id = std::to_string(ji.at("image_id").get<std::int64_t>());
    img.width = ji.at("width").get<int>();
    img.height = ji.at("height").get<int>();
    if (img.width <= 0 || img.height <= 0)
      throw ParseError("vg objects: non-positive image size for image " + img.id);
    if (image_index.count(img.id))
      throw ParseError("vg objects: duplicate image_id " + img.id);
    auto& ids = node_index[img.id];
    for (const json& jo : ji.value("objects", json::array())) {
      const std::int64_t oid = jo.at("object_id").get<std::int64_t>();
      if (ids.count(oid))
        throw ParseError("vg objects: duplicate object_id in image " + img.id);
      std::string name;
      if (jo.contains("names") && jo.at("names").is_array() && !jo.at("names").empty())
        name = jo.at("names")[0].get<std::string>();
      else if (jo.contains("name"))
        name = jo.at("name").get<std::string>();
      else
        throw ParseError("vg objects: object without a name in image " + img.id);

      const auto cat = space.find_object(name);
      if (!cat) {
        ids[oid] = -1;
        ++st.objects_dropped_vocab;
        continue;
      }
      const double w = jo.at("w").get<double>();
      const double h = jo.at("h").get<double>();
      const double x = jo.at("x").get<double>();
      const double y = jo.at("y").get<double>();
      BoundingBox box{std::clamp(x / img.width, 0.0, 1.0),
                      std::clamp(y / img.height, 0.0, 1.0),
                      std::clamp((x + w) / img.width, 0.0, 1.0),
                      std::clamp((y + h) / img.height, 0.0, 1.0)};
      if (w <= 0.0 || h <= 0.0 || !box.valid()) {
        ids[oid] = -1;
        ++st.objects_dropped_degenerate;
        continue;
      }
      ids[oid] = static_cast<int>(img.nodes.size());
      img.nodes.push_back(GtNode{box, *cat});
      ++st.objects_kept;
    }
    image_index[img.id] = manifest.images.size();
    manifest.images.push_back(std::move(img));
    ++st.images;
  }

  for (const json& ji : jrel) {
    const std::string id = std::to_string(ji.at("image_id").get<std::int64_t>());
    auto img_it = image_index.find(id);
    if (img_it == image_index.end())
      throw ParseError("vg relationships: image " + id + " missing from objects file");
    ImageRecord& img = manifest.images[img_it->second];
    const auto& ids = node_index[id];
    std::set<std::array<int, 3>> seen;
    for (const json& jr : ji.value("relationships", json::array())) {
      const std::string pred_name = jr.at("predicate").get<std::string>();
      auto subj_field = jr.contains("subject") ? jr.at("subject") : json();
      auto obj_field = jr.contains("object") ? jr.at("object") : json();
      if (!subj_field.is_object() || !obj_field.is_object())
        throw ParseError("vg relationships: subject/object must be objects (image " + id + ")");
      const std::int64_t sid = subj_field.at("object_id").get<std::int64_t>();
      const std::int64_t oid = obj_field.at("object_id").get<std::int64_t>();
      auto sit = ids.find(sid);
      auto oit = ids.find(oid);
      if (sit == ids.end() || oit == ids.end())
        throw ParseError("vg relationships: unknown object_id in image " + id);

      const auto pred = space.find_predicate(pred_name);
      if (!pred) {
        ++st.edges_dropped_vocab;
        continue;
      }
      if (sit->second < 0 || oit->second < 0) {
        ++st.edges_dropped_filtered_node;
        continue;
      }
      if (!seen.insert({sit->second, oit->second, pred->v}).second) {
        ++st.edges_dropped_duplicate;
        continue;
      }
      img.edges.push_back(GtEdge{sit->second, oit->second, *pred});
      ++st.edges_kept;
    }
  }

  for (ImageRecord& img : manifest.images) {
    img.no_relationships = img.edges.empty();
    if (img.no_relationships) ++st.images_empty;
  }
  manifest.validate(space);
  return manifest;
}

// ---------------------------------------------------------------------------
// Synthetic generation.
// ---------------------------------------------------------------------------

void SyntheticSpec::validate() const {
  if (num_images < 1 || min_nodes < 2 || max_nodes < min_nodes || hidden_dim < 1 ||
      num_supers < 1 || predicates_per_super < 1 || grid_channels < 1 ||
      grid_height < 1 || grid_width < 1 || num_object_categories < 1)
    throw Error("SyntheticSpec: all counts must be >= 1 (and max_nodes >= min_nodes >= 2)");
  if (!(margin > 0.0)) throw Error("SyntheticSpec: margin must be > 0");
  if (noise < 0.0) throw Error("SyntheticSpec: noise must be >= 0");
  if (!(class_skew > 0.0 && class_skew <= 1.0))
    throw Error("SyntheticSpec: class_skew must be in (0, 1]");
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw Error("SyntheticSpec: train_fraction must be in (0, 1)");
  if (grid_channels < num_supers + predicates_per_super)
    throw Error("SyntheticSpec: infeasible geometry, need grid_channels >= "
                "num_supers + predicates_per_super");
}

std::string SyntheticSpec::to_json() const {
  json j;
  j["num_images"] = num_images;
  j["min_nodes"] = min_nodes;
  j["max_nodes"] = max_nodes;
  j["hidden_dim"] = hidden_dim;
  j["num_supers"] = num_supers;
  j["predicates_per_super"] = predicates_per_super;
  j["margin"] = margin;
  j["noise"] = noise;
  j["super_noise"] = super_noise;
  j["seed"] = seed;
  j["grid_channels"] = grid_channels;
  j["grid_height"] = grid_height;
  j["grid_width"] = grid_width;
  j["num_object_categories"] = num_object_categories;
  j["class_skew"] = class_skew;
  j["detection_label_flip"] = detection_label_flip;
  j["detection_box_jitter"] = detection_box_jitter;
  j["train_fraction"] = train_fraction;
  return j.dump(2);
}

SyntheticSpec SyntheticSpec::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("synthetic spec: JSON parse error: ") + e.what());
  }
  SyntheticSpec s;
  s.num_images = j.value("num_images", s.num_images);
  s.min_nodes = j.value("min_nodes", s.min_nodes);
  s.max_nodes = j.value("max_nodes", s.max_nodes);
  s.hidden_dim = j.value("hidden_dim", s.hidden_dim);
  s.num_supers = j.value("num_supers", s.num_supers);
  s.predicates_per_super = j.value("predicates_per_super", s.predicates_per_super);
  s.margin = j.value("margin", s.margin);
  s.noise = j.value("noise", s.noise);
  s.super_noise = j.value("super_noise", s.super_noise);
  s.seed = j.value("seed", s.seed);
  s.grid_channels = j.value("grid_channels", s.grid_channels);
  s.grid_height = j.value("grid_height", s.grid_height);
  s.grid_width = j.value("grid_width", s.grid_width);
  s.num_object_categories = j.value("num_object_categories", s.num_object_categories);
  s.class_skew = j.value("class_skew", s.class_skew);
  s.detection_label_flip = j.value("detection_label_flip", s.detection_label_flip);
  s.detection_box_jitter = j.value("detection_box_jitter", s.detection_box_jitter);
  s.train_fraction = j.value("train_fraction", s.train_fraction);
  s.validate();
  return s;
}

SyntheticSpec SyntheticSpec::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("synthetic spec: cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return from_json(buf.str());
}

namespace {

LabelSpace synthetic_space(const SyntheticSpec& spec) {
  std::vector<std::string> objects, predicates, supers;
  std::map<std::string, std::string> predicate_supers;
  for (int o = 0; o < spec.num_object_categories; ++o)
    objects.push_back("object_" + std::to_string(o));
  for (int s = 0; s < spec.num_supers; ++s)
    supers.push_back("super_" + std::to_string(s));
  for (int s = 0; s < spec.num_supers; ++s)
    for (int i = 0; i < spec.predicates_per_super; ++i) {
      const std::string name = "pred_" + std::to_string(s) + "_" + std::to_string(i);
      predicates.push_back(name);
      predicate_supers[name] = supers[static_cast<std::size_t>(s)];
    }
  return LabelSpace::build(objects, predicates, supers, predicate_supers);
}

/// Class means on an orthogonal scaffold, mirrored across the subject and
/// object halves. Super-category s contributes R/sqrt(2) on axis s of each
/// half; class k within a super contributes rho on axis S+k of each half.
/// Pairwise distances are then exactly R*sqrt(2) across super-categories and
/// 2*rho within, giving the required geometry (within <= margin, cross >=
/// 3*margin) deterministically; it is still verified exhaustively below.
Matrix planted_means(const SyntheticSpec& spec, const LabelSpace& space) {
  const int C = spec.grid_channels;
  const int dim = 2 * C;
  int max_members = 0;
  for (int s = 0; s < spec.num_supers; ++s)
    max_members = std::max(
        max_members, static_cast<int>(space.predicates_in(SuperCategoryId(s)).size()));
  if (spec.num_supers + max_members > C)
    throw Error("generate_synthetic: infeasible geometry, need grid_channels >= "
                "num_supers + predicates_per_super");

  const double center = 3.0 * spec.margin / std::sqrt(2.0);
  const double offset = 0.45 * spec.margin;  // pairwise within = 0.9 * margin
  Matrix means = Matrix::Zero(dim, space.num_predicates());
  for (int s = 0; s < spec.num_supers; ++s) {
    const auto& members = space.predicates_in(SuperCategoryId(s));
    for (std::size_t k = 0; k < members.size(); ++k) {
      auto mu = means.col(members[k].v);
      mu[s] = center;
      mu[C + s] = center;
      mu[spec.num_supers + static_cast<int>(k)] = offset;
      mu[C + spec.num_supers + static_cast<int>(k)] = offset;
    }
  }
  for (int a = 0; a < space.num_predicates(); ++a)
    for (int b = a + 1; b < space.num_predicates(); ++b) {
      const double d = (means.col(a) - means.col(b)).norm();
      const bool same =
          space.super_of(PredicateId(a)) == space.super_of(PredicateId(b));
      if (same && d > spec.margin)
        throw Error("generate_synthetic: within-super margin violated");
      if (!same && d < 3.0 * spec.margin)
        throw Error("generate_synthetic: cross-super margin violated");
    }
  return means;
}

/// Within-super class sampling weights, geometric decay by class_skew.
std::vector<double> skew_weights(int n, double skew) {
  std::vector<double> w(static_cast<std::size_t>(n));
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    w[static_cast<std::size_t>(i)] = std::pow(skew, i);
    total += w[static_cast<std::size_t>(i)];
  }
  for (double& x : w) x /= total;
  return w;
}

int sample_weighted(const std::vector<double>& w, Rng& rng) {
  const double u = rng.uniform();
  double acc = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    acc += w[i];
    if (u < acc) return static_cast<int>(i);
  }
  return static_cast<int>(w.size()) - 1;
}

BoundingBox tile_box(int node, int tiles) {
  const int row = node / tiles;
  const int col = node % tiles;
  const double inset = 0.08;
  return BoundingBox{(col + inset) / tiles, (row + inset) / tiles,
                     (col + 1.0 - inset) / tiles, (row + 1.0 - inset) / tiles};
}

BoundingBox jitter_box(const BoundingBox& b, double jitter, Rng& rng) {
  const double w = b.x_max - b.x_min;
  const double h = b.y_max - b.y_min;
  BoundingBox out;
  out.x_min = std::clamp(b.x_min + rng.uniform(-jitter, jitter) * w, 0.0, 1.0);
  out.y_min = std::clamp(b.y_min + rng.uniform(-jitter, jitter) * h, 0.0, 1.0);
  out.x_max = std::clamp(b.x_max + rng.uniform(-jitter, jitter) * w, 0.0, 1.0);
  out.y_max = std::clamp(b.y_max + rng.uniform(-jitter, jitter) * h, 0.0, 1.0);
  if (!(out.x_min < out.x_max)) {
    out.x_min = b.x_min;
    out.x_max = b.x_max;
  }
  if (!(out.y_min < out.y_max)) {
    out.y_min = b.y_min;
    out.y_max = b.y_max;
  }
  return out;
}

}  // namespace

SyntheticData generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);

  SyntheticData data;
  data.space = synthetic_space(spec);
  data.class_means = planted_means(spec, data.space);

  const auto weights = skew_weights(spec.predicates_per_super, spec.class_skew);
  const int C = spec.grid_channels;

  const int train_images = std::max(
      1, std::min(spec.num_images - 1,
                  static_cast<int>(std::ceil(spec.train_fraction * spec.num_images))));

  data.train.split = "train";
  data.test.split = "test";
  data.train.hierarchy_path = "hierarchy.json";
  data.test.hierarchy_path = "hierarchy.json";
  data.train.config_json = spec.to_json();
  data.test.config_json = spec.to_json();

  for (int im = 0; im < spec.num_images; ++im) {
    const bool is_train = im < train_images;
    ImageRecord img;
    img.id = "img_" + std::to_string(im);
    img.grid_path = "grids/" + img.id + ".hsgt";

    const int n = spec.min_nodes + rng.uniform_int(spec.max_nodes - spec.min_nodes + 1);
    const int tiles = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(n))));
    const int pairs = n / 2;

    FeatureGrid grid;
    grid.height = spec.grid_height;
    grid.width = spec.grid_width;
    grid.values = Matrix::Zero(C, grid.cell_count());

    for (int node = 0; node < n; ++node) {
      GtNode g;
      g.box = tile_box(node, tiles);
      g.category = ObjectCategoryId(rng.uniform_int(spec.num_object_categories));
      if (grid.cells_inside(g.box).empty())
        throw Error("generate_synthetic: infeasible geometry, node box covers no cell "
                    "centers; enlarge the grid or reduce max_nodes");
      img.nodes.push_back(g);
    }

    for (int pair = 0; pair < pairs; ++pair) {
      const int subject = 2 * pair;
      const int object = 2 * pair + 1;
      const int super = rng.uniform_int(spec.num_supers);
      const int within = sample_weighted(weights, rng);
      const PredicateId pred =
          data.space.predicates_in(SuperCategoryId(super))[static_cast<std::size_t>(within)];
      img.edges.push_back(GtEdge{subject, object, pred});

      // Context = class mean + Gaussian noise, split across the
      // subject/object halves and painted as constants so pooling reproduces
      // it exactly. Noise is anisotropic: the super-center directions (the
      // first num_supers axes) get `super_noise`, making super-category
      // membership genuinely ambiguous while the detailed class stays
      // better determined.
      const double sup_sigma = spec.super_noise < 0.0 ? spec.noise : spec.super_noise;
      Vector context = data.class_means.col(pred.v);
      for (int i = 0; i < 2 * C; ++i) {
        const bool super_dim =
            (i % C) < spec.num_supers;  // center axes of either half
        context[i] += (super_dim ? sup_sigma : spec.noise) * rng.normal();
      }
      for (int cell : grid.cells_inside(img.nodes[static_cast<std::size_t>(subject)].box))
        grid.values.col(cell) = context.head(C);
      for (int cell : grid.cells_inside(img.nodes[static_cast<std::size_t>(object)].box))
        grid.values.col(cell) = context.tail(C);

      if (is_train)
        data.train_triplets.insert(
            {img.nodes[static_cast<std::size_t>(subject)].category.v, pred.v,
             img.nodes[static_cast<std::size_t>(object)].category.v});
    }
    // Odd leftover node, if any, carries only noise.
    if (n % 2 == 1) {
      const Vector stray = rng.normal_vector(C, spec.noise);
      for (int cell : grid.cells_inside(img.nodes[static_cast<std::size_t>(n - 1)].box))
        grid.values.col(cell) = stray;
    }

    for (const GtNode& node : img.nodes) {
      DetectionRecord det;
      det.box = jitter_box(node.box, spec.detection_box_jitter, rng);
      int label = node.category.v;
      if (spec.num_object_categories > 1 && rng.uniform() < spec.detection_label_flip) {
        const int shift = 1 + rng.uniform_int(spec.num_object_categories - 1);
        label = (label + shift) % spec.num_object_categories;
      }
      det.label = ObjectCategoryId(label);
      det.score = rng.uniform(0.6, 1.0);
      img.detections.push_back(det);
    }

    img.no_relationships = img.edges.empty();
    data.grids.emplace(img.id, std::move(grid));
    (is_train ? data.train : data.test).images.push_back(std::move(img));
  }

  data.train.validate(data.space);
  data.test.validate(data.space);
  return data;
}

void write_synthetic(const SyntheticData& data, const SyntheticSpec& spec,
                     const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir / "grids");
  {
    std::ofstream h(dir / "hierarchy.json", std::ios::trunc);
    if (!h) throw IoError("write_synthetic: cannot write hierarchy.json");
    h << data.space.to_json() << "\n";
  }
  data.train.save(dir / "train.json");
  data.test.save(dir / "test.json");
  for (const auto& [id, grid] : data.grids)
    save_grid(grid, dir / "grids" / (id + ".hsgt"));
  save_triplets(data.train_triplets, data.space, dir / "train_triplets.json");
  std::ofstream s(dir / "spec.json", std::ios::trunc);
  if (!s) throw IoError("write_synthetic: cannot write spec.json");
  s << spec.to_json() << "\n";
}

// ---------------------------------------------------------------------------
// External logits and triplet files.
// ---------------------------------------------------------------------------

namespace {

Vector read_simplex(const json& arr, Eigen::Index expected, const char* what) {
  if (!arr.is_array() || static_cast<Eigen::Index>(arr.size()) != expected)
    throw ParseError(std::string(what) + ": expected " + std::to_string(expected) +
                     " probabilities");
  Vector v(expected);
  for (Eigen::Index i = 0; i < expected; ++i) {
    v[i] = arr[static_cast<std::size_t>(i)].get<double>();
    if (!(v[i] >= 0.0) || !std::isfinite(v[i]))
      throw ParseError(std::string(what) + ": negative or non-finite probability");
  }
  const double sum = v.sum();
  if (std::abs(sum - 1.0) > 1e-6)
    throw ParseError(std::string(what) + ": probabilities sum to " +
                     std::to_string(sum) + ", outside the 1e-6 tolerance");
  return v / sum;
}

}  // namespace

std::vector<ExternalPrediction> load_external_logits(const std::filesystem::path& path,
                                                     const LabelSpace& space) {
  std::ifstream in(path);
  if (!in) throw IoError("external logits: cannot open " + path.string());
  std::vector<ExternalPrediction> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw ParseError("external logits: line " + std::to_string(line_no) + ": " +
                       e.what());
    }
    ExternalPrediction rec;
    rec.image_id = j.at("image").is_string() ? j.at("image").get<std::string>()
                                             : std::to_string(j.at("image").get<std::int64_t>());
    rec.subject = j.at("subject").get<int>();
    rec.object = j.at("object").get<int>();

    EdgePrediction& p = rec.prediction;
    p.mode = HeadMode::bayes_consistent;
    p.connectivity = j.value("connectivity", 1.0);
    if (!(p.connectivity >= 0.0 && p.connectivity <= 1.0))
      throw ParseError("external logits: line " + std::to_string(line_no) +
                       ": connectivity outside [0,1]");
    p.super_probs = read_simplex(j.at("super_probs"), space.num_supers(),
                                 "external logits super_probs");
    if (!j.contains("conditional_probs") || !j.at("conditional_probs").is_array() ||
        static_cast<int>(j.at("conditional_probs").size()) != space.num_supers())
      throw ParseError("external logits: line " + std::to_string(line_no) +
                       ": conditional_probs must have one entry per super-category");
    p.joint_probs = Vector::Zero(space.num_predicates());
    for (int s = 0; s < space.num_supers(); ++s) {
      const auto& members = space.predicates_in(SuperCategoryId(s));
      Vector cond = read_simplex(j.at("conditional_probs")[static_cast<std::size_t>(s)],
                                 static_cast<Eigen::Index>(members.size()),
                                 "external logits conditional_probs");
      for (std::size_t k = 0; k < members.size(); ++k)
        p.joint_probs[members[k].v] =
            p.super_probs[s] * cond[static_cast<Eigen::Index>(k)];
      p.conditional_probs.push_back(std::move(cond));
    }
    out.push_back(std::move(rec));
  }
  return out;
}

void save_triplets(const TripletSet& triplets, const LabelSpace& space,
                   const std::filesystem::path& path) {
  json arr = json::array();
  for (const Triplet& t : triplets)
    arr.push_back(json::array({space.object_name(ObjectCategoryId(t[0])),
                               space.predicate_name(PredicateId(t[1])),
                               space.object_name(ObjectCategoryId(t[2]))}));
  json j;
  j["triplets"] = arr;
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("triplets: cannot open " + path.string() + " for writing");
  out << j.dump(2) << "\n";
}

TripletSet load_triplets(const std::filesystem::path& path, const LabelSpace& space) {
  const json j = parse_file(path, "triplets");
  if (!j.is_object() || !j.contains("triplets") || !j.at("triplets").is_array())
    throw ParseError("triplets: expected {\"triplets\": [[subject, predicate, object], ...]}");
  TripletSet out;
  for (const json& jt : j.at("triplets")) {
    if (!jt.is_array() || jt.size() != 3)
      throw ParseError("triplets: each entry must be [subject, predicate, object]");
    const auto subj = space.find_object(jt[0].get<std::string>());
    const auto pred = space.find_predicate(jt[1].get<std::string>());
    const auto obj = space.find_object(jt[2].get<std::string>());
    if (!subj || !pred || !obj)
      throw ParseError("triplets: unknown name in entry " + jt.dump());
    out.insert({subj->v, pred->v, obj->v});
  }
  return out;
}

}  // namespace hsg
