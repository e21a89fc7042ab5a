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
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "tricornet/data.hpp"
#include "tricornet/errors.hpp"
#include "tricornet/model.hpp"
#include "tricornet/synth.hpp"

// Plain-text run configuration: "[section]" headers, key = value lines, '#' comments.

namespace tricornet {

struct ConfigEntry {
  std::string section;
  std::string key;
  std::string value;
  std::size_t line = 0;

  std::string qualified() const { return section.empty() ? key : section + "." + key; }
};

inline std::vector<ConfigEntry> parse_config_text(std::istream& is, const std::string& source) {
  std::vector<ConfigEntry> out;
  std::string raw, section;
  std::size_t lineno = 0;
  while (std::getline(is, raw)) {
    ++lineno;
    const auto hash = raw.find('#');
    const std::string line = detail::trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(source + ":" + std::to_string(lineno) + ": malformed section header");
      section = detail::trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(source + ":" + std::to_string(lineno) + ": expected key = value");
    out.push_back({section, detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1)), lineno});
  }
  return out;
}

inline std::vector<ConfigEntry> read_config_file(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError(path.string() + ": cannot open config file");
  return parse_config_text(is, path.string());
}

namespace detail {

[[noreturn]] inline void config_fail(const ConfigEntry& e, const std::string& what) {
  const std::string where = e.line ? "line " + std::to_string(e.line) : std::string("override");
  throw ConfigError(where + ": key '" + e.qualified() + "': " + what);
}

inline std::size_t config_size(const ConfigEntry& e, std::size_t min = 0) {
  long long v;
  if (!parse_long(e.value, v) || v < static_cast<long long>(min)) {
    config_fail(e, "expected an integer >= " + std::to_string(min) + ", got '" + e.value + "'");
  }
  return static_cast<std::size_t>(v);
}

inline std::uint64_t config_u64(const ConfigEntry& e) {
  char* end = nullptr;
  errno = 0;
  const unsigned long long v = std::strtoull(e.value.c_str(), &end, 10);
  if (e.value.empty() || e.value[0] == '-' || errno || *end) config_fail(e, "expected a non-negative integer");
  return v;
}

inline double config_real(const ConfigEntry& e) {
  double v;
  if (!parse_real(e.value, v)) config_fail(e, "expected a real number, got '" + e.value + "'");
  return v;
}

inline bool config_bool(const ConfigEntry& e) {
  if (e.value == "true" || e.value == "1") return true;
  if (e.value == "false" || e.value == "0") return false;
  config_fail(e, "expected true or false");
}

inline std::string fmt_real(double v) { return format_real(v); }

}  // namespace detail

// ---- model config (also embedded in checkpoints) ---------------------------------

inline std::string format_model_config(const ModelConfig& c) {
  std::ostringstream os;
  os << "variant=" << to_string(c.variant) << "\n"
     << "depth=" << c.depth << "\n"
     << "conv_len=" << c.conv_len << "\n"
     << "hidden=" << c.hidden << "\n"
     << "num_classes=" << c.num_classes << "\n"
     << "input_dim=" << c.input_dim << "\n"
     << "dropout_conv=" << detail::fmt_real(c.dropout_conv) << "\n"
     << "dropout_lstm=" << detail::fmt_real(c.dropout_lstm) << "\n"
     << "seed=" << c.seed << "\n";
  return os.str();
}

/// Applies one model key; returns false when the key is not a model key.
inline bool apply_model_key(ModelConfig& c, const ConfigEntry& e) {
  if (e.key == "variant") {
    try {
      c.variant = parse_variant(e.value);
    } catch (const ConfigError& err) {
      detail::config_fail(e, err.what());
    }
  } else if (e.key == "depth") {
    c.depth = detail::config_size(e, 1);
  } else if (e.key == "conv_len") {
    c.conv_len = detail::config_size(e, 1);
  } else if (e.key == "hidden") {
    c.hidden = detail::config_size(e, 1);
  } else if (e.key == "num_classes") {
    c.num_classes = detail::config_size(e, 2);
  } else if (e.key == "input_dim") {
    c.input_dim = detail::config_size(e, 1);
  } else if (e.key == "dropout_conv") {
    c.dropout_conv = detail::config_real(e);
  } else if (e.key == "dropout_lstm") {
    c.dropout_lstm = detail::config_real(e);
  } else if (e.key == "seed") {
    c.seed = detail::config_u64(e);
  } else {
    return false;
  }
  return true;
}

inline ModelConfig parse_model_config(const std::string& text) {
  std::istringstream is(text);
  ModelConfig c;
  for (const auto& e : parse_config_text(is, "model config")) {
    if (!apply_model_key(c, e)) detail::config_fail(e, "unknown key");
  }
  c.validate();
  return c;
}

// ---- run config ---------------------------------------------------------------------

struct RunConfig {
  fs::path manifest;
  std::string train_split = "train";
  std::string val_split = "test";
  ModelConfig model;  // num_classes and input_dim are filled from the manifest
  std::size_t epochs = 200;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;
  std::optional<double> stop_at_train_accuracy;
  std::vector<double> thresholds{10.0, 25.0, 50.0};
  bool background_in_accuracy = true;
  bool background_in_segments = false;
  fs::path out_dir = "out";
};

/// Reads a run config. Unknown sections or keys are rejected; a relative manifest
/// path is resolved against the config file's directory.
inline RunConfig parse_run_config(const std::vector<ConfigEntry>& entries, const fs::path& base_dir = {}) {
  RunConfig rc;
  bool seed_in_model = false;
  for (const auto& e : entries) {
    if (e.section == "data") {
      if (e.key == "manifest") {
        rc.manifest = e.value;
        if (rc.manifest.is_relative() && !base_dir.empty()) rc.manifest = base_dir / rc.manifest;
      } else if (e.key == "train_split") {
        rc.train_split = e.value;
      } else if (e.key == "val_split") {
        rc.val_split = e.value;
      } else {
        detail::config_fail(e, "unknown key");
      }
    } else if (e.section == "model") {
      if (e.key == "num_classes" || e.key == "input_dim") detail::config_fail(e, "taken from the dataset manifest");
      if (e.key == "seed") seed_in_model = true;
      if (!apply_model_key(rc.model, e)) detail::config_fail(e, "unknown key");
    } else if (e.section == "train") {
      if (e.key == "epochs") {
        rc.epochs = detail::config_size(e);
      } else if (e.key == "lr") {
        rc.lr = detail::config_real(e);
        if (!(rc.lr > 0.0)) detail::config_fail(e, "must be positive");
      } else if (e.key == "beta1") {
        rc.beta1 = detail::config_real(e);
      } else if (e.key == "beta2") {
        rc.beta2 = detail::config_real(e);
      } else if (e.key == "adam_eps") {
        rc.adam_eps = detail::config_real(e);
      } else if (e.key == "seed") {
        rc.seed = detail::config_u64(e);
      } else if (e.key == "stop_at_train_accuracy") {
        rc.stop_at_train_accuracy = detail::config_real(e);
      } else {
        detail::config_fail(e, "unknown key");
      }
    } else if (e.section == "eval") {
      if (e.key == "thresholds") {
        rc.thresholds.clear();
        std::istringstream ss(e.value);
        std::string tok;
        while (std::getline(ss, tok, ',')) {
          double k;
          if (!detail::parse_real(detail::trim(tok), k) || !(k > 0.0 && k < 100.0)) {
            detail::config_fail(e, "thresholds must be comma-separated values in (0, 100)");
          }
          rc.thresholds.push_back(k);
        }
        if (rc.thresholds.empty()) detail::config_fail(e, "no thresholds given");
      } else if (e.key == "background_in_accuracy") {
        rc.background_in_accuracy = detail::config_bool(e);
      } else if (e.key == "background_in_segments") {
        rc.background_in_segments = detail::config_bool(e);
      } else {
        detail::config_fail(e, "unknown key");
      }
    } else if (e.section == "output") {
      if (e.key == "dir") {
        rc.out_dir = e.value;
      } else {
        detail::config_fail(e, "unknown key");
      }
    } else {
      detail::config_fail(e, "unknown section '" + e.section + "'");
    }
  }
  // One seed drives initialization, shuffling and dropout unless the model seed is set separately.
  if (!seed_in_model) rc.model.seed = rc.seed;
  if (rc.manifest.empty()) throw ConfigError("key 'data.manifest' is required");
  for (double r : {rc.model.dropout_conv, rc.model.dropout_lstm}) {
    if (!(r >= 0.0 && r < 1.0)) throw ConfigError("dropout rates must be in [0, 1)");
  }
  return rc;
}

inline RunConfig read_run_config(const fs::path& path) {
  return parse_run_config(read_config_file(path), path.parent_path());
}

inline std::string format_run_config(const RunConfig& rc) {
  std::ostringstream os;
  os << "[data]\n"
     << "manifest = " << fs::absolute(rc.manifest).lexically_normal().string() << "\n"
     << "train_split = " << rc.train_split << "\n"
     << "val_split = " << rc.val_split << "\n\n"
     << "[model]\n"
     << "variant = " << to_string(rc.model.variant) << "\n"
     << "depth = " << rc.model.depth << "\n"
     << "conv_len = " << rc.model.conv_len << "\n"
     << "hidden = " << rc.model.hidden << "\n"
     << "dropout_conv = " << detail::fmt_real(rc.model.dropout_conv) << "\n"
     << "dropout_lstm = " << detail::fmt_real(rc.model.dropout_lstm) << "\n"
     << "seed = " << rc.model.seed << "\n\n"
     << "[train]\n"
     << "epochs = " << rc.epochs << "\n"
     << "lr = " << detail::fmt_real(rc.lr) << "\n"
     << "beta1 = " << detail::fmt_real(rc.beta1) << "\n"
     << "beta2 = " << detail::fmt_real(rc.beta2) << "\n"
     << "adam_eps = " << detail::fmt_real(rc.adam_eps) << "\n"
     << "seed = " << rc.seed << "\n";
  if (rc.stop_at_train_accuracy) os << "stop_at_train_accuracy = " << detail::fmt_real(*rc.stop_at_train_accuracy) << "\n";
  os << "\n[eval]\nthresholds = ";
  for (std::size_t i = 0; i < rc.thresholds.size(); ++i) os << (i ? "," : "") << detail::fmt_real(rc.thresholds[i]);
  os << "\nbackground_in_accuracy = " << (rc.background_in_accuracy ? "true" : "false") << "\n"
     << "background_in_segments = " << (rc.background_in_segments ? "true" : "false") << "\n\n"
     << "[output]\ndir = " << rc.out_dir.string() << "\n";
  return os.str();
}

// ---- synthetic dataset config ---------------------------------------------------------

struct SynthFileConfig {
  SynthConfig synth;
  FeatureFormat format = FeatureFormat::kText;
};

/// Reads a [synth] config. Repeatable keys: ambiguous_pair = "a,b" and dependency = "cue->target".
inline SynthFileConfig parse_synth_config(const std::vector<ConfigEntry>& entries) {
  SynthFileConfig out;
  auto& c = out.synth;
  const auto parse_label_pair = [](const ConfigEntry& e, const std::string& sep) {
    const auto pos = e.value.find(sep);
    long long a, b;
    if (pos == std::string::npos || !detail::parse_long(detail::trim(e.value.substr(0, pos)), a) ||
        !detail::parse_long(detail::trim(e.value.substr(pos + sep.size())), b)) {
      detail::config_fail(e, "expected two class ids separated by '" + sep + "'");
    }
    return std::pair<Label, Label>{static_cast<Label>(a), static_cast<Label>(b)};
  };
  for (const auto& e : entries) {
    if (e.section == "output" && e.key == "feature_format") {
      if (e.value == "text") {
        out.format = FeatureFormat::kText;
      } else if (e.value == "binary") {
        out.format = FeatureFormat::kBinary;
      } else {
        detail::config_fail(e, "expected text or binary");
      }
      continue;
    }
    if (e.section != "synth") detail::config_fail(e, "unknown key");
    if (e.key == "classes") {
      c.num_classes = detail::config_size(e, 2);
    } else if (e.key == "actions_per_video") {
      c.actions_per_video = detail::config_size(e, 1);
    } else if (e.key == "sub_actions_min") {
      c.sub_actions_min = detail::config_size(e, 1);
    } else if (e.key == "sub_actions_max") {
      c.sub_actions_max = detail::config_size(e, 1);
    } else if (e.key == "frames_min") {
      c.frames_min = detail::config_size(e, 1);
    } else if (e.key == "frames_max") {
      c.frames_max = detail::config_size(e, 1);
    } else if (e.key == "feature_dim") {
      c.feature_dim = detail::config_size(e, 1);
    } else if (e.key == "noise") {
      c.noise = detail::config_real(e);
    } else if (e.key == "ambiguous_pair") {
      c.ambiguous_pairs.push_back(parse_label_pair(e, ","));
    } else if (e.key == "dependency") {
      const auto [cue, target] = parse_label_pair(e, "->");
      c.dependencies.push_back({cue, target});
    } else if (e.key == "train_videos") {
      c.train_videos = detail::config_size(e, 1);
    } else if (e.key == "test_videos") {
      c.test_videos = detail::config_size(e, 1);
    } else if (e.key == "seed") {
      c.seed = detail::config_u64(e);
    } else {
      detail::config_fail(e, "unknown key");
    }
  }
  c.validate();
  return out;
}

inline std::string format_synth_config(const SynthFileConfig& f) {
  const auto& c = f.synth;
  std::ostringstream os;
  os << "[synth]\n"
     << "classes = " << c.num_classes << "\n"
     << "actions_per_video = " << c.actions_per_video << "\n"
     << "sub_actions_min = " << c.sub_actions_min << "\n"
     << "sub_actions_max = " << c.sub_actions_max << "\n"
     << "frames_min = " << c.frames_min << "\n"
     << "frames_max = " << c.frames_max << "\n"
     << "feature_dim = " << c.feature_dim << "\n"
     << "noise = " << detail::fmt_real(c.noise) << "\n";
  for (const auto& [a, b] : c.ambiguous_pairs) os << "ambiguous_pair = " << a << "," << b << "\n";
  for (const auto& r : c.dependencies) os << "dependency = " << r.cue << "->" << r.target << "\n";
  os << "train_videos = " << c.train_videos << "\n"
     << "test_videos = " << c.test_videos << "\n"
     << "seed = " << c.seed << "\n\n"
     << "[output]\nfeature_format = " << (f.format == FeatureFormat::kBinary ? "binary" : "text") << "\n";
  return os.str();
}

}  // namespace tricornet
