// Copyright 2026 The SCDAG Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Self-describing binary container for named matrices.
//
// Layout (all integers little-endian):
//   bytes 0..7    magic, "SCDAGBIN"
//   u32           format version (1)
//   u64           header length L
//   L bytes       UTF-8 JSON header:
//                   { "meta": <free-form object>,
//                     "tensors": [ {"name", "rows", "cols"}, ... ] }
//   payload       for each tensor in header order, rows*cols IEEE-754
//                 float64 values in row-major order
//
// Loading what was saved reproduces every value bit for bit.

#include <bit>
#include <cstdint>
#include <cstring>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "scdag/error.hpp"
#include "scdag/io.hpp"
#include "scdag/nn/tensor.hpp"

namespace scdag::nn {

static_assert(std::endian::native == std::endian::little, "container I/O assumes a little-endian host");

struct NamedMatrix {
  std::string name;
  Matrix value;
};

struct Container {
  nlohmann::json meta = nlohmann::json::object();
  std::vector<NamedMatrix> tensors;

  const Matrix& get(std::string_view name) const {
    for (const auto& t : tensors)
      if (t.name == name) return t.value;
    throw Error("container has no tensor named " + std::string(name));
  }
};

inline constexpr std::string_view kContainerMagic = "SCDAGBIN";
inline constexpr std::uint32_t kContainerVersion = 1;

namespace detail {
template <typename T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

template <typename T>
T take(std::string_view in, std::size_t& pos) {
  if (pos + sizeof(T) > in.size()) throw ParseError("container: truncated");
  T v;
  std::memcpy(&v, in.data() + pos, sizeof(T));
  pos += sizeof(T);
  return v;
}
}  // namespace detail

inline std::string serialize(const Container& c) {
  nlohmann::json header;
  header["meta"] = c.meta;
  header["tensors"] = nlohmann::json::array();
  for (const auto& t : c.tensors)
    header["tensors"].push_back({{"name", t.name}, {"rows", t.value.rows()}, {"cols", t.value.cols()}});
  const std::string h = header.dump();
  std::string out(kContainerMagic);
  detail::put<std::uint32_t>(out, kContainerVersion);
  detail::put<std::uint64_t>(out, h.size());
  out += h;
  for (const auto& t : c.tensors)
    if (t.value.size() > 0)
      out.append(reinterpret_cast<const char*>(t.value.data()), static_cast<std::size_t>(t.value.size()) * sizeof(double));
  return out;
}

inline Container deserialize(std::string_view bytes) {
  if (bytes.substr(0, kContainerMagic.size()) != kContainerMagic) throw ParseError("container: bad magic");
  std::size_t pos = kContainerMagic.size();
  const auto version = detail::take<std::uint32_t>(bytes, pos);
  if (version != kContainerVersion) throw ParseError("container: unsupported version " + std::to_string(version));
  const auto len = detail::take<std::uint64_t>(bytes, pos);
  if (pos + len > bytes.size()) throw ParseError("container: truncated header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(pos, len));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("container: bad header: ") + e.what());
  }
  pos += len;
  Container c;
  c.meta = header.value("meta", nlohmann::json::object());
  for (const auto& t : header.at("tensors")) {
    NamedMatrix nm;
    nm.name = t.at("name").get<std::string>();
    const auto rows = t.at("rows").get<Eigen::Index>();
    const auto cols = t.at("cols").get<Eigen::Index>();
    nm.value.resize(rows, cols);
    const std::size_t bytes_needed = static_cast<std::size_t>(rows * cols) * sizeof(double);
    if (pos + bytes_needed > bytes.size()) throw ParseError("container: truncated payload");
    if (bytes_needed > 0) std::memcpy(nm.value.data(), bytes.data() + pos, bytes_needed);
    pos += bytes_needed;
    c.tensors.push_back(std::move(nm));
  }
  if (pos != bytes.size()) throw ParseError("container: trailing bytes");
  return c;
}

inline void save_container(const Container& c, const std::string& path) { write_file(path, serialize(c)); }
inline Container load_container(const std::string& path) { return deserialize(read_file(path)); }

}  // namespace scdag::nn
