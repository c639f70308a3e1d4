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
#include "hsg/tensor_io.hpp"

#include <cstring>
#include <fstream>

namespace hsg {

namespace {

constexpr char kMagic[4] = {'H', 'S', 'G', 'T'};
constexpr std::uint32_t kVersion = 1;
constexpr std::uint8_t kDtypeF64 = 0;

// Buffered writer that tracks the running FNV-1a hash of everything written.
struct HashedBuffer {
  std::vector<char> bytes;

  void write(const void* data, std::size_t size) {
    const char* p = static_cast<const char*>(data);
    bytes.insert(bytes.end(), p, p + size);
  }
  template <typename T>
  void write_pod(T v) {
    write(&v, sizeof(T));
  }
};

struct Reader {
  const std::vector<char>& bytes;
  std::size_t pos = 0;

  void read(void* out, std::size_t size) {
    if (pos + size > bytes.size()) throw IoError("container: truncated file");
    std::memcpy(out, bytes.data() + pos, size);
    pos += size;
  }
  template <typename T>
  T read_pod() {
    T v;
    read(&v, sizeof(T));
    return v;
  }
};

}  // namespace

std::uint64_t fnv1a64(const void* data, std::size_t size, std::uint64_t seed) {
  std::uint64_t h = seed;
  const unsigned char* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < size; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}

std::int64_t NamedTensor::element_count() const {
  std::int64_t n = 1;
  for (std::int64_t d : dims) {
    if (d < 0) throw ShapeError("NamedTensor: negative dimension");
    n *= d;
  }
  return n;
}

NamedTensor NamedTensor::from_matrix(std::string name, const Matrix& m) {
  NamedTensor t;
  t.name = std::move(name);
  t.dims = {m.rows(), m.cols()};
  t.data.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) t.data.push_back(m(r, c));
  return t;
}

NamedTensor NamedTensor::from_vector(std::string name, const Vector& v) {
  NamedTensor t;
  t.name = std::move(name);
  t.dims = {v.size()};
  t.data.assign(v.data(), v.data() + v.size());
  return t;
}

NamedTensor NamedTensor::from_grid(std::string name, const FeatureGrid& g) {
  g.validate();
  NamedTensor t;
  t.name = std::move(name);
  t.dims = {g.channels(), g.height, g.width};
  t.data.reserve(static_cast<std::size_t>(g.values.size()));
  for (int ch = 0; ch < g.channels(); ++ch)
    for (int cell = 0; cell < g.cell_count(); ++cell)
      t.data.push_back(g.values(ch, cell));
  return t;
}

Matrix NamedTensor::to_matrix() const {
  if (dims.size() != 2) throw ShapeError("to_matrix: tensor '" + name + "' is not rank 2");
  Matrix m(dims[0], dims[1]);
  std::size_t i = 0;
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = data[i++];
  return m;
}

Vector NamedTensor::to_vector() const {
  if (dims.size() != 1) throw ShapeError("to_vector: tensor '" + name + "' is not rank 1");
  Vector v(dims[0]);
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = data[static_cast<std::size_t>(i)];
  return v;
}

FeatureGrid NamedTensor::to_grid() const {
  if (dims.size() != 3) throw ShapeError("to_grid: tensor '" + name + "' is not rank 3");
  FeatureGrid g;
  g.height = static_cast<int>(dims[1]);
  g.width = static_cast<int>(dims[2]);
  g.values.resize(dims[0], dims[1] * dims[2]);
  std::size_t i = 0;
  for (Eigen::Index ch = 0; ch < g.values.rows(); ++ch)
    for (Eigen::Index cell = 0; cell < g.values.cols(); ++cell)
      g.values(ch, cell) = data[i++];
  g.validate();
  return g;
}

const NamedTensor* TensorContainer::find(const std::string& name) const {
  for (const NamedTensor& t : tensors)
    if (t.name == name) return &t;
  return nullptr;
}

const NamedTensor& TensorContainer::require(const std::string& name) const {
  const NamedTensor* t = find(name);
  if (t == nullptr) throw IoError("container: missing tensor '" + name + "'");
  return *t;
}

void TensorContainer::save(const std::filesystem::path& path) const {
  HashedBuffer buf;
  buf.write(kMagic, sizeof(kMagic));
  buf.write_pod(kVersion);
  buf.write_pod(static_cast<std::uint64_t>(metadata_json.size()));
  buf.write(metadata_json.data(), metadata_json.size());
  buf.write_pod(static_cast<std::uint32_t>(tensors.size()));
  for (const NamedTensor& t : tensors) {
    if (t.element_count() != static_cast<std::int64_t>(t.data.size()))
      throw ShapeError("container: tensor '" + t.name + "' size/dims mismatch");
    buf.write_pod(static_cast<std::uint32_t>(t.name.size()));
    buf.write(t.name.data(), t.name.size());
    buf.write_pod(kDtypeF64);
    buf.write_pod(static_cast<std::uint32_t>(t.dims.size()));
    for (std::int64_t d : t.dims) buf.write_pod(static_cast<std::uint64_t>(d));
    buf.write(t.data.data(), t.data.size() * sizeof(double));
  }
  const std::uint64_t checksum = fnv1a64(buf.bytes.data(), buf.bytes.size());
  buf.write_pod(checksum);

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("container: cannot open " + path.string() + " for writing");
  out.write(buf.bytes.data(), static_cast<std::streamsize>(buf.bytes.size()));
  if (!out) throw IoError("container: write failed for " + path.string());
}

TensorContainer TensorContainer::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("container: cannot open " + path.string());
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)),
                          std::istreambuf_iterator<char>());
  if (bytes.size() < sizeof(kMagic) + sizeof(std::uint32_t) + sizeof(std::uint64_t))
    throw IoError("container: truncated file");

  const std::size_t body = bytes.size() - sizeof(std::uint64_t);
  std::uint64_t stored = 0;
  std::memcpy(&stored, bytes.data() + body, sizeof(stored));
  if (fnv1a64(bytes.data(), body) != stored)
    throw IoError("container: checksum mismatch (corrupt file)");

  Reader r{bytes};
  char magic[4];
  r.read(magic, sizeof(magic));
  if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw IoError("container: bad magic");
  const auto version = r.read_pod<std::uint32_t>();
  if (version != kVersion)
    throw IoError("container: unsupported version " + std::to_string(version));

  TensorContainer c;
  const auto meta_len = r.read_pod<std::uint64_t>();
  c.metadata_json.resize(meta_len);
  r.read(c.metadata_json.data(), meta_len);
  const auto count = r.read_pod<std::uint32_t>();
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedTensor t;
    const auto name_len = r.read_pod<std::uint32_t>();
    t.name.resize(name_len);
    r.read(t.name.data(), name_len);
    const auto dtype = r.read_pod<std::uint8_t>();
    if (dtype != kDtypeF64) throw IoError("container: unsupported dtype");
    const auto rank = r.read_pod<std::uint32_t>();
    for (std::uint32_t d = 0; d < rank; ++d)
      t.dims.push_back(static_cast<std::int64_t>(r.read_pod<std::uint64_t>()));
    const std::int64_t n = t.element_count();
    t.data.resize(static_cast<std::size_t>(n));
    r.read(t.data.data(), static_cast<std::size_t>(n) * sizeof(double));
    c.tensors.push_back(std::move(t));
  }
  if (r.pos != body) throw IoError("container: trailing bytes");
  return c;
}

void save_grid(const FeatureGrid& grid, const std::filesystem::path& path) {
  TensorContainer c;
  c.tensors.push_back(NamedTensor::from_grid("grid", grid));
  c.save(path);
}

FeatureGrid load_grid(const std::filesystem::path& path) {
  return TensorContainer::load(path).require("grid").to_grid();
}

}  // namespace hsg
