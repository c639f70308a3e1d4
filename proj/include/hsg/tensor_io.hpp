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
#include <string>
#include <vector>

#include "hsg/common.hpp"
#include "hsg/feature_grid.hpp"

namespace hsg {

/// One named dense float64 tensor with a row-major payload.
struct NamedTensor {
  std::string name;
  std::vector<std::int64_t> dims;
  std::vector<double> data;

  static NamedTensor from_matrix(std::string name, const Matrix& m);
  static NamedTensor from_vector(std::string name, const Vector& v);
  static NamedTensor from_grid(std::string name, const FeatureGrid& g);

  Matrix to_matrix() const;
  Vector to_vector() const;
  FeatureGrid to_grid() const;

  std::int64_t element_count() const;
};

/// Binary tensor container.
///
/// Layout (little-endian):
///   magic "HSGT" | u32 version | u64 metadata length | metadata JSON bytes |
///   u32 entry count | entries | u64 FNV-1a checksum of everything before it
/// Entry:
///   u32 name length | name bytes | u8 dtype (0 = f64) | u32 rank |
///   u64 dims[rank] | row-major f64 payload
///
/// Round trips are bitwise exact; any truncation or mutation fails the
/// checksum.
struct TensorContainer {
  std::string metadata_json = "{}";
  std::vector<NamedTensor> tensors;

  const NamedTensor* find(const std::string& name) const;
  const NamedTensor& require(const std::string& name) const;

  void save(const std::filesystem::path& path) const;
  static TensorContainer load(const std::filesystem::path& path);
};

/// FNV-1a 64 over a byte range.
std::uint64_t fnv1a64(const void* data, std::size_t size,
                      std::uint64_t seed = 14695981039346656037ull);

void save_grid(const FeatureGrid& grid, const std::filesystem::path& path);
FeatureGrid load_grid(const std::filesystem::path& path);

}  // namespace hsg
