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

#include <algorithm>
#include <bit>
#include <cerrno>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "tricornet/errors.hpp"
#include "tricornet/metrics.hpp"
#include "tricornet/tensor.hpp"

// Dataset files.
//
//   features (text)    first line "T d", then T lines of d space-separated reals
//   features (binary)  "TRIC", u32 version (1), u64 T, u64 d, T*d f64; little-endian
//   labels             T lines, one integer class id each
//   manifest           key=value lines, then "[split NAME]" blocks listing sample ids
//
// Manifest keys: version, feature_dim, class (repeated, index order),
// background (class id), allow_split_overlap (true/false),
// sample = "<id> <features path> <labels path>" (paths relative to the manifest).

namespace tricornet {

namespace fs = std::filesystem;

struct SequenceSample {
  std::string id;
  Tensor features;  // T x d
  Labels labels;    // T class ids
  std::vector<std::uint8_t> mask;  // frames included in the loss; empty means all

  bool operator==(const SequenceSample&) const = default;
};

struct SampleEntry {
  std::string id;
  std::string features;  // as written in the manifest
  std::string labels;
};

struct Split {
  std::string name;
  std::vector<std::string> ids;
};

struct DatasetManifest {
  std::vector<std::string> class_names;
  std::optional<Label> background;
  std::size_t feature_dim = 0;
  std::vector<SampleEntry> samples;
  std::vector<Split> splits;
  bool allow_split_overlap = false;

  std::size_t num_classes() const { return class_names.size(); }

  const Split* find_split(const std::string& name) const {
    for (const auto& s : splits) {
      if (s.name == name) return &s;
    }
    return nullptr;
  }
};

struct Dataset {
  DatasetManifest manifest;
  std::vector<SequenceSample> samples;

  const SequenceSample* find(const std::string& id) const {
    for (const auto& s : samples) {
      if (s.id == id) return &s;
    }
    return nullptr;
  }

  /// Samples of a named split, in split order. Unknown names raise ConfigError.
  std::vector<const SequenceSample*> split(const std::string& name) const {
    const Split* sp = manifest.find_split(name);
    if (!sp) throw ConfigError("split '" + name + "' is not defined in the manifest");
    std::vector<const SequenceSample*> out;
    for (const auto& id : sp->ids) out.push_back(find(id));
    return out;
  }
};

enum class FeatureFormat { kText, kBinary };

inline constexpr char kFeatureMagic[4] = {'T', 'R', 'I', 'C'};
inline constexpr std::uint32_t kFeatureVersion = 1;

namespace detail {

[[noreturn]] inline void load_fail(const fs::path& file, std::size_t line, const std::string& what) {
  throw LoadError(file.string() + (line ? ":" + std::to_string(line) : std::string()) + ": " + what);
}

inline std::string format_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void put_u32(std::ostream& os, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) os.put(static_cast<char>((v >> (8 * i)) & 0xff));
}
inline void put_u64(std::ostream& os, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) os.put(static_cast<char>((v >> (8 * i)) & 0xff));
}
inline void put_f64(std::ostream& os, double v) { put_u64(os, std::bit_cast<std::uint64_t>(v)); }

inline bool get_u64(std::istream& is, std::uint64_t& v) {
  unsigned char b[8];
  if (!is.read(reinterpret_cast<char*>(b), 8)) return false;
  v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
  return true;
}
inline bool get_u32(std::istream& is, std::uint32_t& v) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) return false;
  v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | b[i];
  return true;
}
inline bool get_f64(std::istream& is, double& v) {
  std::uint64_t u;
  if (!get_u64(is, u)) return false;
  v = std::bit_cast<double>(u);
  return true;
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline bool parse_long(const std::string& s, long long& out) {
  if (s.empty()) return false;
  char* end = nullptr;
  errno = 0;
  out = std::strtoll(s.c_str(), &end, 10);
  return errno == 0 && *end == '\0';
}

inline bool parse_real(const std::string& s, double& out) {
  if (s.empty()) return false;
  char* end = nullptr;
  out = std::strtod(s.c_str(), &end);
  return *end == '\0' && std::isfinite(out);
}

}  // namespace detail

// ---- features ---------------------------------------------------------------------

inline void write_features(const fs::path& path, const Tensor& features, FeatureFormat format = FeatureFormat::kText) {
  if (features.rank() != 2) throw ShapeError("write_features: expected T x d, got " + shape_str(features.shape()));
  std::ofstream os(path, std::ios::binary);
  if (!os) throw LoadError(path.string() + ": cannot open for writing");
  const std::size_t T = features.rows(), d = features.cols();
  if (format == FeatureFormat::kBinary) {
    os.write(kFeatureMagic, 4);
    detail::put_u32(os, kFeatureVersion);
    detail::put_u64(os, T);
    detail::put_u64(os, d);
    for (double v : features.data()) detail::put_f64(os, v);
  } else {
    os << T << ' ' << d << '\n';
    for (std::size_t t = 0; t < T; ++t) {
      for (std::size_t c = 0; c < d; ++c) os << (c ? " " : "") << detail::format_real(features(t, c));
      os << '\n';
    }
  }
  if (!os) throw LoadError(path.string() + ": write failed");
}

/// Reads a text or binary feature file; the format is detected from the magic bytes.
inline Tensor read_features(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) detail::load_fail(path, 0, "cannot open feature file");
  char magic[4] = {};
  is.read(magic, 4);
  if (is.gcount() == 4 && std::equal(magic, magic + 4, kFeatureMagic)) {
    std::uint32_t version = 0;
    std::uint64_t T = 0, d = 0;
    if (!detail::get_u32(is, version) || !detail::get_u64(is, T) || !detail::get_u64(is, d)) {
      detail::load_fail(path, 0, "truncated binary feature header");
    }
    if (version != kFeatureVersion) detail::load_fail(path, 0, "unsupported feature version " + std::to_string(version));
    if (T == 0 || d == 0) detail::load_fail(path, 0, "empty feature matrix");
    std::vector<double> data(T * d);
    for (auto& v : data) {
      if (!detail::get_f64(is, v)) detail::load_fail(path, 0, "truncated binary feature data");
      if (!std::isfinite(v)) detail::load_fail(path, 0, "non-finite feature value");
    }
    return Tensor({T, d}, std::move(data));
  }
  is.clear();
  is.seekg(0);
  std::string line;
  std::size_t lineno = 0;
  long long T = 0, d = 0;
  {
    if (!std::getline(is, line)) detail::load_fail(path, 1, "missing 'T d' header");
    ++lineno;
    std::istringstream hs(line);
    std::string a, b, extra;
    hs >> a >> b;
    if (!detail::parse_long(a, T) || !detail::parse_long(b, d) || (hs >> extra) || T < 1 || d < 1) {
      detail::load_fail(path, lineno, "header must be 'T d' with positive integers");
    }
  }
  std::vector<double> data;
  data.reserve(static_cast<std::size_t>(T * d));
  for (long long t = 0; t < T; ++t) {
    if (!std::getline(is, line)) {
      detail::load_fail(path, lineno + 1, "expected " + std::to_string(T) + " feature rows, found " + std::to_string(t));
    }
    ++lineno;
    std::istringstream ls(line);
    std::string tok;
    long long count = 0;
    while (ls >> tok) {
      double v;
      if (!detail::parse_real(tok, v)) detail::load_fail(path, lineno, "bad real '" + tok + "'");
      data.push_back(v);
      ++count;
    }
    if (count != d) {
      detail::load_fail(path, lineno, "dimension mismatch: expected " + std::to_string(d) + " values, found " +
                                          std::to_string(count));
    }
  }
  while (std::getline(is, line)) {
    ++lineno;
    if (!detail::trim(line).empty()) detail::load_fail(path, lineno, "unexpected trailing data");
  }
  return Tensor({static_cast<std::size_t>(T), static_cast<std::size_t>(d)}, std::move(data));
}

// ---- labels -------------------------------------------------------------------------

inline void write_labels(const fs::path& path, std::span<const Label> labels) {
  std::ofstream os(path);
  if (!os) throw LoadError(path.string() + ": cannot open for writing");
  for (Label l : labels) os << l << '\n';
  if (!os) throw LoadError(path.string() + ": write failed");
}

/// Reads one class id per line; ids must lie in [0, num_classes) when num_classes > 0.
inline Labels read_labels(const fs::path& path, std::size_t num_classes = 0) {
  std::ifstream is(path);
  if (!is) detail::load_fail(path, 0, "cannot open label file");
  Labels out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const std::string tok = detail::trim(line);
    if (tok.empty()) continue;
    long long v;
    if (!detail::parse_long(tok, v)) detail::load_fail(path, lineno, "bad label '" + tok + "'");
    if (v < 0 || (num_classes && v >= static_cast<long long>(num_classes))) {
      detail::load_fail(path, lineno,
                        "unknown label " + tok + " (class count " + std::to_string(num_classes) + ")");
    }
    out.push_back(static_cast<Label>(v));
  }
  if (out.empty()) detail::load_fail(path, 0, "no labels");
  return out;
}

// ---- manifest -----------------------------------------------------------------------

inline std::string format_manifest(const DatasetManifest& m) {
  std::ostringstream os;
  os << "# tricornet dataset manifest\n";
  os << "version=1\n";
  os << "feature_dim=" << m.feature_dim << "\n";
  for (const auto& c : m.class_names) os << "class=" << c << "\n";
  if (m.background) os << "background=" << *m.background << "\n";
  os << "allow_split_overlap=" << (m.allow_split_overlap ? "true" : "false") << "\n";
  for (const auto& s : m.samples) os << "sample=" << s.id << ' ' << s.features << ' ' << s.labels << "\n";
  for (const auto& sp : m.splits) {
    os << "\n[split " << sp.name << "]\n";
    for (const auto& id : sp.ids) os << id << "\n";
  }
  return os.str();
}

/// Parses and structurally validates a manifest (sample files are not opened).
inline DatasetManifest parse_manifest(std::istream& is, const fs::path& path) {
  DatasetManifest m;
  std::string line;
  std::size_t lineno = 0;
  Split* current = nullptr;
  std::map<std::string, std::size_t> sample_line;
  std::optional<long long> background;
  std::size_t background_line = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const std::string t = detail::trim(line);
    if (t.empty() || t[0] == '#') continue;
    if (t.front() == '[') {
      if (t.back() != ']' || t.rfind("[split ", 0) != 0) detail::load_fail(path, lineno, "expected '[split NAME]'");
      const std::string name = detail::trim(t.substr(7, t.size() - 8));
      if (name.empty() || name.find_first_of(" \t") != std::string::npos) detail::load_fail(path, lineno, "bad split name");
      if (m.find_split(name)) detail::load_fail(path, lineno, "duplicate split '" + name + "'");
      m.splits.push_back({name, {}});
      current = &m.splits.back();
      continue;
    }
    if (current) {
      if (!sample_line.count(t)) detail::load_fail(path, lineno, "split '" + current->name + "' references unknown sample '" + t + "'");
      if (std::find(current->ids.begin(), current->ids.end(), t) != current->ids.end()) {
        detail::load_fail(path, lineno, "sample '" + t + "' listed twice in split '" + current->name + "'");
      }
      current->ids.push_back(t);
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos) detail::load_fail(path, lineno, "expected key=value");
    const std::string key = detail::trim(t.substr(0, eq));
    const std::string value = detail::trim(t.substr(eq + 1));
    long long n = 0;
    if (key == "version") {
      if (value != "1") detail::load_fail(path, lineno, "unsupported manifest version " + value);
    } else if (key == "feature_dim") {
      if (!detail::parse_long(value, n) || n < 1) detail::load_fail(path, lineno, "feature_dim must be a positive integer");
      m.feature_dim = static_cast<std::size_t>(n);
    } else if (key == "class") {
      if (value.empty()) detail::load_fail(path, lineno, "empty class name");
      m.class_names.push_back(value);
    } else if (key == "background") {
      if (!detail::parse_long(value, n)) detail::load_fail(path, lineno, "background must be a class id");
      background = n;
      background_line = lineno;
    } else if (key == "allow_split_overlap") {
      if (value != "true" && value != "false") detail::load_fail(path, lineno, "allow_split_overlap must be true or false");
      m.allow_split_overlap = value == "true";
    } else if (key == "sample") {
      std::istringstream ss(value);
      SampleEntry e;
      std::string extra;
      if (!(ss >> e.id >> e.features >> e.labels) || (ss >> extra)) {
        detail::load_fail(path, lineno, "sample needs '<id> <features> <labels>'");
      }
      if (sample_line.count(e.id)) detail::load_fail(path, lineno, "duplicate sample id '" + e.id + "'");
      sample_line[e.id] = lineno;
      m.samples.push_back(std::move(e));
    } else {
      detail::load_fail(path, lineno, "unknown manifest key '" + key + "'");
    }
  }
  if (m.class_names.size() < 2) detail::load_fail(path, 0, "manifest needs at least two classes");
  if (m.feature_dim == 0) detail::load_fail(path, 0, "manifest is missing feature_dim");
  if (background) {
    if (*background < 0 || *background >= static_cast<long long>(m.class_names.size())) {
      detail::load_fail(path, background_line, "background id out of range");
    }
    m.background = static_cast<Label>(*background);
  }
  if (!m.allow_split_overlap) {
    std::map<std::string, std::string> owner;
    for (const auto& sp : m.splits) {
      for (const auto& id : sp.ids) {
        auto [it, fresh] = owner.emplace(id, sp.name);
        if (!fresh) {
          detail::load_fail(path, 0, "sample '" + id + "' appears in splits '" + it->second + "' and '" + sp.name +
                                         "' (set allow_split_overlap=true to permit)");
        }
      }
    }
  }
  return m;
}

/// Loads a manifest and every sample it lists, validating widths, lengths and label range.
inline Dataset load_dataset(const fs::path& manifest_path) {
  std::ifstream is(manifest_path);
  if (!is) detail::load_fail(manifest_path, 0, "cannot open manifest");
  Dataset ds;
  ds.manifest = parse_manifest(is, manifest_path);
  const fs::path base = manifest_path.parent_path();
  for (const auto& e : ds.manifest.samples) {
    SequenceSample s;
    s.id = e.id;
    const fs::path fpath = base / e.features;
    const fs::path lpath = base / e.labels;
    s.features = read_features(fpath);
    s.labels = read_labels(lpath, ds.manifest.num_classes());
    if (s.features.cols() != ds.manifest.feature_dim) {
      detail::load_fail(fpath, 1, "dimension mismatch: " + std::to_string(s.features.cols()) +
                                      " features per frame, manifest says " + std::to_string(ds.manifest.feature_dim));
    }
    if (s.features.rows() != s.labels.size()) {
      detail::load_fail(lpath, 0, std::to_string(s.labels.size()) + " labels for " +
                                      std::to_string(s.features.rows()) + " feature rows");
    }
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

/// Writes manifest.txt plus features/<id>.feat and labels/<id>.lab under `dir`.
/// Manifest sample entries are rewritten to point at the written files.
inline fs::path save_dataset(const fs::path& dir, const Dataset& ds, FeatureFormat format = FeatureFormat::kText) {
  fs::create_directories(dir / "features");
  fs::create_directories(dir / "labels");
  DatasetManifest m = ds.manifest;
  m.samples.clear();
  for (const auto& s : ds.samples) {
    SampleEntry e{s.id, "features/" + s.id + ".feat", "labels/" + s.id + ".lab"};
    write_features(dir / e.features, s.features, format);
    write_labels(dir / e.labels, s.labels);
    m.samples.push_back(std::move(e));
  }
  const fs::path manifest = dir / "manifest.txt";
  std::ofstream os(manifest);
  if (!os) throw LoadError(manifest.string() + ": cannot open for writing");
  os << format_manifest(m);
  return manifest;
}

}  // namespace tricornet
