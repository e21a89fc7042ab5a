/*
 * Copyright 2026 The TricorNet Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>

#include "tricornet/config.hpp"
#include "tricornet/data.hpp"
#include "tricornet/errors.hpp"
#include "tricornet/model.hpp"

// Checkpoint layout (all integers and reals little-endian):
//
//   "TRCK"            magic
//   u32               format version (1)
//   u64 + bytes       model config as key=value text
//   u64               tensor count
//   per tensor:       u64 + bytes name, u64 rank, rank x u64 dims, numel x f64

namespace tricornet {

inline constexpr char kCheckpointMagic[4] = {'T', 'R', 'C', 'K'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

inline void save_checkpoint(const fs::path& path, const Model& model) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw LoadError(path.string() + ": cannot open for writing");
  const auto put_string = [&](const std::string& s) {
    detail::put_u64(os, s.size());
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
  };
  os.write(kCheckpointMagic, 4);
  detail::put_u32(os, kCheckpointVersion);
  put_string(format_model_config(model.config()));
  const auto params = model.named_parameters();
  detail::put_u64(os, params.size());
  for (const auto& [name, t] : params) {
    put_string(name);
    detail::put_u64(os, t->rank());
    for (auto d : t->shape()) detail::put_u64(os, d);
    for (double v : t->data()) detail::put_f64(os, v);
  }
  if (!os) throw LoadError(path.string() + ": write failed");
}

/// Rebuilds the model from the stored config and fills in every tensor, checking
/// names and shapes against what that config produces.
inline Model load_checkpoint(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) detail::load_fail(path, 0, "cannot open checkpoint");
  const auto fail = [&](const std::string& what) { detail::load_fail(path, 0, what); };
  char magic[4] = {};
  if (!is.read(magic, 4) || !std::equal(magic, magic + 4, kCheckpointMagic)) fail("not a checkpoint (bad magic)");
  std::uint32_t version = 0;
  if (!detail::get_u32(is, version)) fail("truncated header");
  if (version != kCheckpointVersion) fail("unsupported checkpoint version " + std::to_string(version));
  const auto get_string = [&](std::size_t limit) {
    std::uint64_t n = 0;
    if (!detail::get_u64(is, n) || n > limit) fail("truncated or oversized string");
    std::string s(n, '\0');
    if (!is.read(s.data(), static_cast<std::streamsize>(n))) fail("truncated string");
    return s;
  };
  ModelConfig cfg;
  try {
    cfg = parse_model_config(get_string(1 << 16));
  } catch (const ConfigError& e) {
    fail(std::string("bad model config: ") + e.what());
  }
  Model model = Model::build(cfg);
  auto params = model.named_parameters();
  std::uint64_t count = 0;
  if (!detail::get_u64(is, count)) fail("truncated tensor count");
  if (count != params.size()) {
    fail("expected " + std::to_string(params.size()) + " tensors for this config, found " + std::to_string(count));
  }
  for (auto& [name, t] : params) {
    const std::string stored = get_string(1 << 12);
    if (stored != name) fail("tensor '" + stored + "' where '" + name + "' was expected");
    std::uint64_t rank = 0;
    if (!detail::get_u64(is, rank) || rank > 8) fail("bad rank for '" + name + "'");
    Shape shape(rank);
    for (auto& d : shape) {
      std::uint64_t v = 0;
      if (!detail::get_u64(is, v)) fail("truncated shape for '" + name + "'");
      d = v;
    }
    if (shape != t->shape()) {
      fail("tensor '" + name + "' has shape " + shape_str(shape) + ", config requires " + shape_str(t->shape()));
    }
    for (auto& v : t->data()) {
      if (!detail::get_f64(is, v)) fail("truncated data for '" + name + "'");
    }
  }
  if (is.peek() != std::char_traits<char>::eof()) fail("trailing bytes after last tensor");
  return model;
}

}  // namespace tricornet
