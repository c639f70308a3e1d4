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
#include "hsg/hierarchy.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace hsg {

using nlohmann::json;

namespace {

std::vector<std::string> read_name_array(const json& j, const char* key) {
  if (!j.contains(key) || !j.at(key).is_array())
    throw ParseError(std::string("hierarchy: missing array '") + key + "'");
  std::vector<std::string> names;
  for (const auto& item : j.at(key)) {
    if (!item.is_string())
      throw ParseError(std::string("hierarchy: '") + key + "' entries must be strings");
    names.push_back(item.get<std::string>());
  }
  return names;
}

void require_unique(const std::vector<std::string>& names, const char* what) {
  std::set<std::string> seen;
  for (const auto& n : names)
    if (!seen.insert(n).second)
      throw ParseError(std::string("hierarchy: duplicate ") + what + " name '" + n + "'");
}

// nlohmann::json silently keeps the last value for duplicate object keys,
// which would hide a predicate assigned to two super-categories. Walk the
// parse events and reject duplicates anywhere in the document.
void reject_duplicate_keys(const std::string& text) {
  std::vector<std::set<std::string>> scopes;
  std::string err;
  auto cb = [&](int /*depth*/, json::parse_event_t event, json& parsed) -> bool {
    switch (event) {
      case json::parse_event_t::object_start:
        scopes.emplace_back();
        break;
      case json::parse_event_t::object_end:
        scopes.pop_back();
        break;
      case json::parse_event_t::key: {
        const auto key = parsed.get<std::string>();
        if (!scopes.empty() && !scopes.back().insert(key).second && err.empty())
          err = "hierarchy: duplicate key '" + key + "' (e.g. a predicate assigned to two super-categories)";
        break;
      }
      default:
        break;
    }
    return true;
  };
  const json parsed = json::parse(text, cb);
  (void)parsed;
  if (!err.empty()) throw ParseError(err);
}

}  // namespace

LabelSpace LabelSpace::parse(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("hierarchy: JSON parse error: ") + e.what());
  }
  reject_duplicate_keys(text);
  if (!j.is_object()) throw ParseError("hierarchy: top level must be an object");

  auto objects = read_name_array(j, "objects");
  auto predicates = read_name_array(j, "predicates");
  auto supers = read_name_array(j, "supers");

  if (!j.contains("predicate_supers") || !j.at("predicate_supers").is_object())
    throw ParseError("hierarchy: missing object 'predicate_supers'");
  std::map<std::string, std::string> predicate_supers =
      j.at("predicate_supers").get<std::map<std::string, std::string>>();

  std::map<std::string, std::string> object_supers;
  if (j.contains("object_supers")) {
    if (!j.at("object_supers").is_object())
      throw ParseError("hierarchy: 'object_supers' must be an object");
    object_supers = j.at("object_supers").get<std::map<std::string, std::string>>();
  }

  return build(std::move(objects), std::move(predicates), std::move(supers),
               predicate_supers, object_supers);
}

LabelSpace LabelSpace::load(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw IoError("hierarchy: cannot open " + file.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

LabelSpace LabelSpace::build(std::vector<std::string> objects,
                             std::vector<std::string> predicates,
                             std::vector<std::string> supers,
                             const std::map<std::string, std::string>& predicate_supers,
                             const std::map<std::string, std::string>& object_supers) {
  LabelSpace s;
  s.objects_ = std::move(objects);
  s.predicates_ = std::move(predicates);
  s.supers_ = std::move(supers);

  require_unique(s.objects_, "object");
  require_unique(s.predicates_, "predicate");
  require_unique(s.supers_, "super-category");
  if (s.objects_.empty()) throw ParseError("hierarchy: no object categories");
  if (s.predicates_.empty()) throw ParseError("hierarchy: no predicates");
  if (s.supers_.empty()) throw ParseError("hierarchy: no super-categories");

  std::map<std::string, int> super_index;
  for (int i = 0; i < static_cast<int>(s.supers_.size()); ++i)
    super_index[s.supers_[i]] = i;

  s.predicate_to_super_.assign(s.predicates_.size(), -1);
  for (int p = 0; p < static_cast<int>(s.predicates_.size()); ++p) {
    auto it = predicate_supers.find(s.predicates_[p]);
    if (it == predicate_supers.end())
      throw ParseError("hierarchy: predicate '" + s.predicates_[p] +
                       "' is not assigned to any super-category");
    auto sit = super_index.find(it->second);
    if (sit == super_index.end())
      throw ParseError("hierarchy: unknown super-category '" + it->second +
                       "' for predicate '" + s.predicates_[p] + "'");
    s.predicate_to_super_[p] = sit->second;
  }
  for (const auto& [name, _] : predicate_supers)
    if (std::find(s.predicates_.begin(), s.predicates_.end(), name) == s.predicates_.end())
      throw ParseError("hierarchy: predicate_supers names unknown predicate '" + name + "'");

  // Object supers: vocabulary built from first appearance in object order;
  // objects without an entry fall into a shared "object" group.
  std::map<std::string, int> obj_super_index;
  s.object_to_super_.assign(s.objects_.size(), -1);
  for (int o = 0; o < static_cast<int>(s.objects_.size()); ++o) {
    auto it = object_supers.find(s.objects_[o]);
    const std::string name = (it == object_supers.end()) ? "object" : it->second;
    auto [pos, inserted] = obj_super_index.try_emplace(
        name, static_cast<int>(s.object_supers_.size()));
    if (inserted) s.object_supers_.push_back(name);
    s.object_to_super_[o] = pos->second;
  }
  for (const auto& [name, _] : object_supers)
    if (std::find(s.objects_.begin(), s.objects_.end(), name) == s.objects_.end())
      throw ParseError("hierarchy: object_supers names unknown object '" + name + "'");

  s.finalize();
  return s;
}

void LabelSpace::finalize() {
  super_members_.assign(supers_.size(), {});
  within_super_index_.assign(predicates_.size(), -1);
  for (int p = 0; p < static_cast<int>(predicates_.size()); ++p) {
    const int sc = predicate_to_super_[p];
    within_super_index_[p] = static_cast<int>(super_members_[sc].size());
    super_members_[sc].push_back(PredicateId(p));
  }
  for (int sc = 0; sc < static_cast<int>(supers_.size()); ++sc)
    if (super_members_[sc].empty())
      throw ParseError("hierarchy: super-category '" + supers_[sc] + "' has no predicates");
}

const std::string& LabelSpace::object_name(ObjectCategoryId id) const {
  if (id.v < 0 || id.v >= num_objects()) throw Error("object id out of range");
  return objects_[id.v];
}

const std::string& LabelSpace::predicate_name(PredicateId id) const {
  if (id.v < 0 || id.v >= num_predicates()) throw Error("predicate id out of range");
  return predicates_[id.v];
}

const std::string& LabelSpace::super_name(SuperCategoryId id) const {
  if (id.v < 0 || id.v >= num_supers()) throw Error("super-category id out of range");
  return supers_[id.v];
}

std::optional<ObjectCategoryId> LabelSpace::find_object(const std::string& name) const {
  for (int i = 0; i < num_objects(); ++i)
    if (objects_[i] == name) return ObjectCategoryId(i);
  return std::nullopt;
}

std::optional<PredicateId> LabelSpace::find_predicate(const std::string& name) const {
  for (int i = 0; i < num_predicates(); ++i)
    if (predicates_[i] == name) return PredicateId(i);
  return std::nullopt;
}

SuperCategoryId LabelSpace::super_of(PredicateId p) const {
  if (p.v < 0 || p.v >= num_predicates()) throw Error("super_of: predicate id out of range");
  return SuperCategoryId(predicate_to_super_[p.v]);
}

const std::vector<PredicateId>& LabelSpace::predicates_in(SuperCategoryId s) const {
  if (s.v < 0 || s.v >= num_supers()) throw Error("predicates_in: super id out of range");
  return super_members_[s.v];
}

int LabelSpace::index_within_super(PredicateId p) const {
  if (p.v < 0 || p.v >= num_predicates()) throw Error("index_within_super: id out of range");
  return within_super_index_[p.v];
}

int LabelSpace::object_super_of(ObjectCategoryId id) const {
  if (id.v < 0 || id.v >= num_objects()) throw Error("object_super_of: id out of range");
  return object_to_super_[id.v];
}

std::uint64_t LabelSpace::digest() const {
  std::uint64_t h = 14695981039346656037ull;
  auto mix = [&h](const std::string& s) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 1099511628211ull;
    }
    h ^= 0xff;
    h *= 1099511628211ull;
  };
  mix("objects");
  for (const auto& n : objects_) mix(n);
  mix("predicates");
  for (const auto& n : predicates_) mix(n);
  mix("supers");
  for (const auto& n : supers_) mix(n);
  mix("partition");
  for (int v : predicate_to_super_) mix(std::to_string(v));
  mix("object_supers");
  for (const auto& n : object_supers_) mix(n);
  for (int v : object_to_super_) mix(std::to_string(v));
  return h;
}

std::string LabelSpace::to_json() const {
  json j;
  j["objects"] = objects_;
  j["predicates"] = predicates_;
  j["supers"] = supers_;
  json ps = json::object();
  for (int p = 0; p < num_predicates(); ++p)
    ps[predicates_[p]] = supers_[predicate_to_super_[p]];
  j["predicate_supers"] = ps;
  json os = json::object();
  for (int o = 0; o < num_objects(); ++o)
    os[objects_[o]] = object_supers_[object_to_super_[o]];
  j["object_supers"] = os;
  return j.dump(2);
}

}  // namespace hsg
