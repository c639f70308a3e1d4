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
#include "hsg/checkpoint.hpp"

#include <sstream>

#include <json.hpp>

#include "hsg/tensor_io.hpp"

namespace hsg {

using nlohmann::json;

std::string to_string(HeadKind k) {
  return k == HeadKind::bayes ? "bayes" : "flat";
}

HeadKind head_kind_from_string(const std::string& s) {
  if (s == "bayes") return HeadKind::bayes;
  if (s == "flat") return HeadKind::flat;
  throw ParseError("unknown head kind '" + s + "' (expected bayes or flat)");
}

std::string to_string(HeadMode m) {
  return m == HeadMode::bayes_consistent ? "bayes_consistent" : "literal_eq3";
}

HeadMode head_mode_from_string(const std::string& s) {
  if (s == "bayes_consistent") return HeadMode::bayes_consistent;
  if (s == "literal_eq3") return HeadMode::literal_eq3;
  throw ParseError("unknown head mode '" + s + "'");
}

void Checkpoint::validate(const LabelSpace& space) const {
  const int d = assembly.hidden_dim();
  if (assembly.input_dim() != assembly_input_dim(grid_channels, space))
    throw ShapeError("checkpoint: projection input dim does not match grid/hierarchy");
  if (head == HeadKind::bayes)
    bayes_params.validate(d, space);
  else
    flat_params.validate(d, space);
}

namespace {

std::string digest_hex(const LabelSpace& space) {
  std::ostringstream os;
  os << std::hex << space.digest();
  return os.str();
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const LabelSpace& space,
                     const std::filesystem::path& path) {
  ckpt.validate(space);
  TensorContainer c;
  json meta;
  meta["kind"] = "hsg-checkpoint";
  meta["head"] = to_string(ckpt.head);
  meta["mode"] = to_string(ckpt.mode);
  meta["hierarchy_digest"] = digest_hex(space);
  meta["hidden_dim"] = ckpt.hidden_dim();
  meta["grid_channels"] = ckpt.grid_channels;
  meta["grid_height"] = ckpt.grid_height;
  meta["grid_width"] = ckpt.grid_width;
  meta["train_config"] = json::parse(ckpt.train_config_json);
  c.metadata_json = meta.dump();

  c.tensors.push_back(NamedTensor::from_matrix("w_proj", ckpt.assembly.w_proj));
  if (ckpt.head == HeadKind::bayes) {
    c.tensors.push_back(NamedTensor::from_matrix("w_conn", ckpt.bayes_params.w_conn));
    c.tensors.push_back(NamedTensor::from_matrix("w_sup", ckpt.bayes_params.w_sup));
    for (std::size_t s = 0; s < ckpt.bayes_params.w_sub.size(); ++s)
      c.tensors.push_back(NamedTensor::from_matrix("w_sub_" + std::to_string(s),
                                                   ckpt.bayes_params.w_sub[s]));
  } else {
    c.tensors.push_back(NamedTensor::from_matrix("w_conn", ckpt.flat_params.w_conn));
    c.tensors.push_back(NamedTensor::from_matrix("w_flat", ckpt.flat_params.w_flat));
  }
  c.save(path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path, const LabelSpace& space) {
  const TensorContainer c = TensorContainer::load(path);
  json meta;
  try {
    meta = json::parse(c.metadata_json);
  } catch (const json::exception& e) {
    throw IoError(std::string("checkpoint: corrupt metadata: ") + e.what());
  }
  if (meta.value("kind", std::string()) != "hsg-checkpoint")
    throw IoError("checkpoint: not a checkpoint container");
  if (meta.value("hierarchy_digest", std::string()) != digest_hex(space))
    throw IoError("checkpoint: hierarchy mismatch (digest differs)");

  Checkpoint ckpt;
  ckpt.head = head_kind_from_string(meta.at("head").get<std::string>());
  ckpt.mode = head_mode_from_string(meta.at("mode").get<std::string>());
  ckpt.grid_channels = meta.at("grid_channels").get<int>();
  ckpt.grid_height = meta.at("grid_height").get<int>();
  ckpt.grid_width = meta.at("grid_width").get<int>();
  if (meta.contains("train_config")) ckpt.train_config_json = meta.at("train_config").dump();

  ckpt.assembly.w_proj = c.require("w_proj").to_matrix();
  if (ckpt.head == HeadKind::bayes) {
    ckpt.bayes_params.w_conn = c.require("w_conn").to_matrix();
    ckpt.bayes_params.w_sup = c.require("w_sup").to_matrix();
    for (int s = 0; s < space.num_supers(); ++s)
      ckpt.bayes_params.w_sub.push_back(
          c.require("w_sub_" + std::to_string(s)).to_matrix());
  } else {
    ckpt.flat_params.w_conn = c.require("w_conn").to_matrix();
    ckpt.flat_params.w_flat = c.require("w_flat").to_matrix();
  }
  ckpt.validate(space);
  return ckpt;
}

}  // namespace hsg
