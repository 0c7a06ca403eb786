/*
 * Copyright (c) 2026, The frnet-cpp Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "frnet/error.hpp"
#include "frnet/models.hpp"
#include "frnet/tensor.hpp"

namespace frnet::checkpoint {

// Layout (all integers u32 little-endian):
//   "FRN1" | version | tensor count
//   per tensor: name length | UTF-8 name | rank | dims... | float32 LE values
//   config length | UTF-8 "key = value" lines
inline constexpr std::array<char, 4> kMagic{'F', 'R', 'N', '1'};
inline constexpr std::uint32_t kVersion = 1;

struct NamedTensor {
  std::string name;
  Tensor<float> tensor;
};

struct Checkpoint {
  std::vector<NamedTensor> tensors;
  std::string config;

  const Tensor<float>* find(const std::string& name) const {
    for (const auto& t : tensors) {
      if (t.name == name) return &t.tensor;
    }
    return nullptr;
  }

  /// Config echo as an ordered key -> value map.
  std::map<std::string, std::string> config_map() const {
    std::map<std::string, std::string> out;
    std::istringstream in(config);
    std::string line;
    while (std::getline(in, line)) {
      const auto eq = line.find('=');
      if (eq == std::string::npos) continue;
      auto trim = [](std::string s) {
        const auto b = s.find_first_not_of(" \t");
        const auto e = s.find_last_not_of(" \t");
        return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
      };
      out[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    return out;
  }
};

namespace detail {

inline void put_u32(std::ostream& os, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                     static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
  os.write(b, 4);
}

inline std::uint32_t get_u32(std::istream& is, const std::string& source) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) throw DataError(source + ": truncated checkpoint");
  return std::uint32_t{b[0]} | (std::uint32_t{b[1]} << 8) | (std::uint32_t{b[2]} << 16) | (std::uint32_t{b[3]} << 24);
}

inline void put_string(std::ostream& os, const std::string& s) {
  put_u32(os, static_cast<std::uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string get_string(std::istream& is, const std::string& source, std::uint32_t limit = 1u << 26) {
  const auto n = get_u32(is, source);
  if (n > limit) throw DataError(source + ": implausible string length " + std::to_string(n));
  std::string s(n, '\0');
  if (n && !is.read(s.data(), n)) throw DataError(source + ": truncated checkpoint");
  return s;
}

}  // namespace detail

inline void write(std::ostream& os, const Checkpoint& ckpt) {
  os.write(kMagic.data(), kMagic.size());
  detail::put_u32(os, kVersion);
  detail::put_u32(os, static_cast<std::uint32_t>(ckpt.tensors.size()));
  for (const auto& [name, t] : ckpt.tensors) {
    detail::put_string(os, name);
    detail::put_u32(os, static_cast<std::uint32_t>(t.rank()));
    for (auto d : t.shape()) detail::put_u32(os, static_cast<std::uint32_t>(d));
    for (float v : t.data()) {
      std::uint32_t bits;
      std::memcpy(&bits, &v, 4);
      detail::put_u32(os, bits);
    }
  }
  detail::put_string(os, ckpt.config);
  if (!os) throw DataError("failed writing checkpoint");
}

inline Checkpoint read(std::istream& is, const std::string& source) {
  std::array<char, 4> magic{};
  if (!is.read(magic.data(), 4) || magic != kMagic) throw DataError(source + ": not an FRN1 checkpoint");
  const auto version = detail::get_u32(is, source);
  if (version != kVersion) throw DataError(source + ": unsupported checkpoint version " + std::to_string(version));
  const auto count = detail::get_u32(is, source);
  Checkpoint ckpt;
  for (std::uint32_t i = 0; i < count; ++i) {
    auto name = detail::get_string(is, source, 1u << 16);
    const auto rank = detail::get_u32(is, source);
    if (rank == 0 || rank > 8) throw DataError(source + ": tensor '" + name + "' has bad rank " + std::to_string(rank));
    Shape shape(rank);
    for (auto& d : shape) {
      d = detail::get_u32(is, source);
      if (d == 0) throw DataError(source + ": tensor '" + name + "' has a zero extent");
    }
    std::vector<float> values(shape_numel(shape));
    for (auto& v : values) {
      const auto bits = detail::get_u32(is, source);
      std::memcpy(&v, &bits, 4);
    }
    ckpt.tensors.push_back({std::move(name), Tensor<float>(std::move(shape), std::move(values))});
  }
  ckpt.config = detail::get_string(is, source);
  return ckpt;
}

inline void save(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError(path + ": cannot open for writing");
  write(os, ckpt);
}

inline Checkpoint load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError(path + ": cannot open checkpoint");
  return read(is, path);
}

/// Parameters of `model` as float32 tensors plus the given config echo.
template <typename T>
Checkpoint snapshot(const Model<T>& model, std::string config) {
  Checkpoint ckpt;
  for (const auto& [name, v] : model.named_parameters()) {
    std::vector<float> values(v->size());
    for (std::size_t i = 0; i < values.size(); ++i) values[i] = static_cast<float>((*v)[i]);
    ckpt.tensors.push_back({name, Tensor<float>(v->shape(), std::move(values))});
  }
  ckpt.config = std::move(config);
  return ckpt;
}

/// Rebuild a model of the given shape and copy every tensor in by name.
template <typename T>
Model<T> restore(const Checkpoint& ckpt, const ModelShape& shape) {
  auto model = Model<T>::init(shape, 0);
  const auto params = model.named_parameters();
  if (params.size() != ckpt.tensors.size()) {
    throw DataError("checkpoint holds " + std::to_string(ckpt.tensors.size()) + " tensors, model expects " +
                    std::to_string(params.size()));
  }
  for (const auto& [name, v] : params) {
    const auto* t = ckpt.find(name);
    if (!t) throw DataError("checkpoint is missing tensor '" + name + "'");
    if (t->shape() != v->shape()) {
      throw DataError("tensor '" + name + "' has shape " + shape_str(t->shape()) + ", expected " + shape_str(v->shape()));
    }
    for (std::size_t i = 0; i < v->size(); ++i) (*v)[i] = static_cast<T>((*t)[i]);
  }
  return model;
}

}  // namespace frnet::checkpoint
