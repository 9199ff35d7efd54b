// Copyright 2026 The privmel Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "privmel/layers.hpp"
#include "privmel/tensor.hpp"

namespace privmel::nn {

// Checkpoint container: a magic/version header, a JSON metadata block
// (model type, config snapshot, fingerprints, RNG state), then named raw
// tensors, then an end marker so truncation is detectable.
//
//   [8B magic][u32 json_len][json][u32 n_tensors]
//   n_tensors x { u32 name_len, name, u8 scalar_tag, u32 rank, i64 dims[], raw data }
//   [8B end marker]
inline constexpr char kCheckpointMagic[9] = "PMELCKP1";
inline constexpr char kCheckpointEnd[9] = "PMELEND1";

template <typename S>
constexpr uint8_t scalar_tag() {
  static_assert(sizeof(S) == 4 || sizeof(S) == 8, "unsupported scalar");
  return sizeof(S) == 4 ? 1 : 2;
}

template <typename S>
struct CheckpointT {
  nlohmann::json meta;
  std::map<std::string, TensorT<S>> tensors;
};

namespace detail {

template <typename T>
void write_pod(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is, const std::string& path) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw DataError("truncated or unreadable checkpoint: " + path);
  return v;
}

inline std::string read_bytes(std::istream& is, size_t n, const std::string& path) {
  std::string s(n, '\0');
  is.read(s.data(), static_cast<std::streamsize>(n));
  if (!is) throw DataError("truncated or unreadable checkpoint: " + path);
  return s;
}

}  // namespace detail

template <typename S>
void save_checkpoint(const std::string& path, const nlohmann::json& meta,
                     const std::vector<const ParamT<S>*>& params) {
  namespace fs = std::filesystem;
  fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw DataError("cannot open checkpoint for writing: " + tmp.string());
    os.write(kCheckpointMagic, 8);
    std::string js = meta.dump();
    detail::write_pod<uint32_t>(os, static_cast<uint32_t>(js.size()));
    os.write(js.data(), static_cast<std::streamsize>(js.size()));
    detail::write_pod<uint32_t>(os, static_cast<uint32_t>(params.size()));
    for (const auto* p : params) {
      detail::write_pod<uint32_t>(os, static_cast<uint32_t>(p->name.size()));
      os.write(p->name.data(), static_cast<std::streamsize>(p->name.size()));
      detail::write_pod<uint8_t>(os, scalar_tag<S>());
      detail::write_pod<uint32_t>(os, static_cast<uint32_t>(p->value.shape.size()));
      for (int64_t d : p->value.shape) detail::write_pod<int64_t>(os, d);
      os.write(reinterpret_cast<const char*>(p->value.ptr()),
               static_cast<std::streamsize>(p->value.data.size() * sizeof(S)));
      // Adam moments ride along so a resume continues the same trajectory.
      os.write(reinterpret_cast<const char*>(p->adam_m.ptr()),
               static_cast<std::streamsize>(p->adam_m.data.size() * sizeof(S)));
      os.write(reinterpret_cast<const char*>(p->adam_v.ptr()),
               static_cast<std::streamsize>(p->adam_v.data.size() * sizeof(S)));
    }
    os.write(kCheckpointEnd, 8);
    if (!os) throw DataError("failed writing checkpoint: " + tmp.string());
  }
  fs::rename(tmp, target);
}

// Reads the JSON metadata block only.
inline nlohmann::json load_checkpoint_meta(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open checkpoint: " + path);
  std::string magic = detail::read_bytes(is, 8, path);
  if (magic != std::string(kCheckpointMagic, 8)) throw DataError("not a checkpoint file: " + path);
  auto len = detail::read_pod<uint32_t>(is, path);
  std::string js = detail::read_bytes(is, len, path);
  nlohmann::json meta = nlohmann::json::parse(js, nullptr, false);
  if (meta.is_discarded()) throw DataError("corrupt checkpoint metadata: " + path);
  return meta;
}

// Restores parameter values and Adam moments into an already-built model.
// The parameter list must match the file exactly (names, shapes, scalar),
// so loading a checkpoint of a different model type or config fails loudly.
template <typename S>
nlohmann::json load_checkpoint(const std::string& path, const std::vector<ParamT<S>*>& params,
                               const std::string& expect_type) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open checkpoint: " + path);
  std::string magic = detail::read_bytes(is, 8, path);
  if (magic != std::string(kCheckpointMagic, 8)) throw DataError("not a checkpoint file: " + path);
  auto len = detail::read_pod<uint32_t>(is, path);
  nlohmann::json meta = nlohmann::json::parse(detail::read_bytes(is, len, path), nullptr, false);
  if (meta.is_discarded()) throw DataError("corrupt checkpoint metadata: " + path);
  std::string type = meta.value("type", "");
  if (type != expect_type) {
    throw CompatibilityError("checkpoint type mismatch: file holds '" + type + "', expected '" + expect_type +
                             "' (" + path + ")");
  }
  auto count = detail::read_pod<uint32_t>(is, path);
  if (count != params.size()) {
    throw CompatibilityError("checkpoint parameter count mismatch: file " + std::to_string(count) + ", model " +
                             std::to_string(params.size()) + " (" + path + ")");
  }
  for (auto* p : params) {
    auto name_len = detail::read_pod<uint32_t>(is, path);
    std::string name = detail::read_bytes(is, name_len, path);
    if (name != p->name) throw CompatibilityError("checkpoint parameter order mismatch at '" + name + "'");
    auto tag = detail::read_pod<uint8_t>(is, path);
    if (tag != scalar_tag<S>()) throw CompatibilityError("checkpoint scalar type mismatch for '" + name + "'");
    auto rank = detail::read_pod<uint32_t>(is, path);
    std::vector<int64_t> shape(rank);
    for (auto& d : shape) d = detail::read_pod<int64_t>(is, path);
    if (shape != p->value.shape) {
      throw CompatibilityError("checkpoint shape mismatch for '" + name + "': file " +
                               TensorT<S>(shape).shape_str() + ", model " + p->value.shape_str());
    }
    auto read_into = [&](TensorT<S>& t) {
      is.read(reinterpret_cast<char*>(t.ptr()), static_cast<std::streamsize>(t.data.size() * sizeof(S)));
      if (!is) throw DataError("truncated checkpoint: " + path);
    };
    read_into(p->value);
    read_into(p->adam_m);
    read_into(p->adam_v);
  }
  std::string end = detail::read_bytes(is, 8, path);
  if (end != std::string(kCheckpointEnd, 8)) throw DataError("truncated checkpoint (missing end marker): " + path);
  return meta;
}

}  // namespace privmel::nn
