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
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hsg/common.hpp"

namespace hsg {

/// Index into the predicate vocabulary.
struct PredicateId {
  int v = -1;
  constexpr PredicateId() = default;
  constexpr explicit PredicateId(int i) : v(i) {}
  friend constexpr bool operator==(PredicateId a, PredicateId b) { return a.v == b.v; }
  friend constexpr bool operator<(PredicateId a, PredicateId b) { return a.v < b.v; }
};

/// Index into the super-category vocabulary.
struct SuperCategoryId {
  int v = -1;
  constexpr SuperCategoryId() = default;
  constexpr explicit SuperCategoryId(int i) : v(i) {}
  friend constexpr bool operator==(SuperCategoryId a, SuperCategoryId b) { return a.v == b.v; }
};

/// Index into the object-category vocabulary.
struct ObjectCategoryId {
  int v = -1;
  constexpr ObjectCategoryId() = default;
  constexpr explicit ObjectCategoryId(int i) : v(i) {}
  friend constexpr bool operator==(ObjectCategoryId a, ObjectCategoryId b) { return a.v == b.v; }
};

/// Immutable label vocabularies plus the disjoint predicate partition.
///
/// Every predicate belongs to exactly one super-category and every
/// super-category holds at least one predicate. Object categories carry their
/// own (possibly trivial) super-category grouping, used only for the one-hot
/// inputs of edge assembly.
class LabelSpace {
 public:
  /// Empty space; populate via load/parse/build.
  LabelSpace() = default;

  /// Parses the hierarchy JSON file. Rejects duplicate names, predicates
  /// assigned to zero or multiple super-categories, unknown super names, and
  /// empty super-categories.
  static LabelSpace load(const std::filesystem::path& file);
  static LabelSpace parse(const std::string& json_text);

  /// Programmatic construction (synthetic data, tests). `predicate_supers`
  /// maps predicate name -> super name; object supers default to a single
  /// "object" group for names missing from `object_supers`.
  static LabelSpace build(std::vector<std::string> objects,
                          std::vector<std::string> predicates,
                          std::vector<std::string> supers,
                          const std::map<std::string, std::string>& predicate_supers,
                          const std::map<std::string, std::string>& object_supers = {});

  int num_objects() const { return static_cast<int>(objects_.size()); }
  int num_predicates() const { return static_cast<int>(predicates_.size()); }
  int num_supers() const { return static_cast<int>(supers_.size()); }
  int num_object_supers() const { return static_cast<int>(object_supers_.size()); }

  const std::string& object_name(ObjectCategoryId id) const;
  const std::string& predicate_name(PredicateId id) const;
  const std::string& super_name(SuperCategoryId id) const;

  std::optional<ObjectCategoryId> find_object(const std::string& name) const;
  std::optional<PredicateId> find_predicate(const std::string& name) const;

  /// The unique super-category containing predicate `p`.
  SuperCategoryId super_of(PredicateId p) const;

  /// Predicates of super-category `s`, in vocabulary order.
  const std::vector<PredicateId>& predicates_in(SuperCategoryId s) const;

  /// Position of `p` within predicates_in(super_of(p)).
  int index_within_super(PredicateId p) const;

  int object_super_of(ObjectCategoryId id) const;

  /// FNV-1a digest of the canonical serialization; checkpoint files record it
  /// so parameters cannot be loaded against a different hierarchy.
  std::uint64_t digest() const;

  std::string to_json() const;

 private:
  void finalize();  // builds inverse maps, validates invariants

  std::vector<std::string> objects_;
  std::vector<std::string> predicates_;
  std::vector<std::string> supers_;
  std::vector<std::string> object_supers_;
  std::vector<int> predicate_to_super_;   // size |predicates|
  std::vector<int> object_to_super_;      // size |objects|
  std::vector<std::vector<PredicateId>> super_members_;
  std::vector<int> within_super_index_;
};

}  // namespace hsg
