/* Copyright 2026 The CAFe Segmentation Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
#pragma once

// Binary checkpoints: a magic tag, a format version, the model config as INI
// text, then every parameter by name as little-endian float32.

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "cafe/config.hpp"
#include "cafe/error.hpp"
#include "cafe/model.hpp"

namespace cafe {

inline constexpr char kCheckpointMagic[8] = {'C', 'A', 'F', 'E', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

inline void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 4);
}

inline std::uint32_t get_u32(std::istream& is, const std::string& path) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) throw IoError(path + ": truncated checkpoint");
  return std::uint32_t(b[0]) | std::uint32_t(b[1]) << 8 | std::uint32_t(b[2]) << 16 |
         std::uint32_t(b[3]) << 24;
}

inline void put_string(std::ostream& os, const std::string& s) {
  put_u32(os, static_cast<std::uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string get_string(std::istream& is, const std::string& path, std::uint32_t limit) {
  const std::uint32_t n = get_u32(is, path);
  if (n > limit) throw IoError(path + ": corrupt checkpoint (string length " + std::to_string(n) + ")");
  std::string s(n, '\0');
  if (n && !is.read(s.data(), n)) throw IoError(path + ": truncated checkpoint");
  return s;
}

}  // namespace detail

struct CheckpointTensor {
  std::string name;
  Shape shape;
  std::vector<float> values;
};

struct Checkpoint {
  std::string config_text;
  std::vector<CheckpointTensor> tensors;
};

inline void write_checkpoint(const std::string& path, const Checkpoint& ck) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path + " for writing");
  os.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  detail::put_u32(os, kCheckpointVersion);
  detail::put_string(os, ck.config_text);
  detail::put_u32(os, static_cast<std::uint32_t>(ck.tensors.size()));
  for (const auto& t : ck.tensors) {
    detail::put_string(os, t.name);
    detail::put_u32(os, static_cast<std::uint32_t>(t.shape.size()));
    for (auto d : t.shape) detail::put_u32(os, static_cast<std::uint32_t>(d));
    for (float f : t.values) detail::put_u32(os, std::bit_cast<std::uint32_t>(f));
  }
  if (!os) throw IoError("failed writing checkpoint " + path);
}

inline Checkpoint read_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint " + path);
  char magic[sizeof(kCheckpointMagic)];
  if (!is.read(magic, sizeof(magic)) || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) {
    throw IoError(path + ": not a checkpoint file");
  }
  const std::uint32_t version = detail::get_u32(is, path);
  if (version != kCheckpointVersion) {
    throw IoError(path + ": unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint ck;
  ck.config_text = detail::get_string(is, path, 1u << 20);
  const std::uint32_t count = detail::get_u32(is, path);
  if (count > (1u << 16)) throw IoError(path + ": corrupt checkpoint (tensor count)");
  for (std::uint32_t i = 0; i < count; ++i) {
    CheckpointTensor t;
    t.name = detail::get_string(is, path, 4096);
    const std::uint32_t rank = detail::get_u32(is, path);
    if (rank > 8) throw IoError(path + ": corrupt checkpoint (rank)");
    std::uint64_t numel = 1;
    for (std::uint32_t r = 0; r < rank; ++r) {
      t.shape.push_back(detail::get_u32(is, path));
      numel *= t.shape.back();
      if (numel > (1ull << 28)) throw IoError(path + ": corrupt checkpoint (tensor size)");
    }
    t.values.resize(numel);
    for (auto& f : t.values) f = std::bit_cast<float>(detail::get_u32(is, path));
    ck.tensors.push_back(std::move(t));
  }
  if (is.peek() != std::char_traits<char>::eof()) throw IoError(path + ": trailing bytes in checkpoint");
  return ck;
}

template <typename T>
void save_model(const std::string& path, const CafeModel<T>& model) {
  Checkpoint ck;
  Ini ini;
  model.config().to_ini(ini);
  ck.config_text = ini.dump();
  for (const auto& p : model.parameters()) {
    CheckpointTensor t{p.name, p.tensor.shape(), {}};
    t.values.reserve(p.tensor.numel());
    for (T v : p.tensor.values()) t.values.push_back(static_cast<float>(v));
    ck.tensors.push_back(std::move(t));
  }
  write_checkpoint(path, ck);
}

// Rebuilds the model from the stored config and overwrites every parameter.
// Missing, extra or mis-shaped tensors are errors.
template <typename T>
CafeModel<T> load_model(const std::string& path) {
  const Checkpoint ck = read_checkpoint(path);
  ModelConfig cfg;
  try {
    cfg = ModelConfig::from_ini(Ini::parse_string(ck.config_text, path));
  } catch (const ConfigError& e) {
    throw IoError(path + ": bad embedded config: " + e.what());
  }
  CafeModel<T> model(cfg);
  std::map<std::string, const CheckpointTensor*> by_name;
  for (const auto& t : ck.tensors) by_name[t.name] = &t;
  auto params = model.parameters();
  if (params.size() != by_name.size()) {
    throw IoError(path + ": checkpoint has " + std::to_string(by_name.size()) + " tensors, model expects " +
                  std::to_string(params.size()));
  }
  for (auto& p : params) {
    auto it = by_name.find(p.name);
    if (it == by_name.end()) throw IoError(path + ": missing tensor " + p.name);
    if (it->second->shape != p.tensor.shape()) {
      throw IoError(path + ": tensor " + p.name + " has shape " + shape_str(it->second->shape) +
                    ", expected " + shape_str(p.tensor.shape()));
    }
    auto& dst = p.tensor.mutable_values();
    for (std::size_t k = 0; k < dst.size(); ++k) dst[k] = static_cast<T>(it->second->values[k]);
  }
  return model;
}

}  // namespace cafe
