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

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "tricornet/data.hpp"
#include "tricornet/errors.hpp"
#include "tricornet/layers.hpp"
#include "tricornet/metrics.hpp"
#include "tricornet/tensor.hpp"

// Synthetic procedural-activity videos with a long-range dependency.
//
// Every class owns a short list of sub-action prototypes; an action segment
// plays its sub-actions in order, each for a random number of frames, emitting
// prototype + isotropic Gaussian noise. The two members of an ambiguous pair
// share one prototype list, so their frames are indistinguishable locally.
// Which member appears is fixed by a cue action earlier in the same video
// (dependency rule cue -> target), with both members equally likely.

namespace tricornet {

struct DependencyRule {
  Label cue = 0;
  Label target = 0;
  bool operator==(const DependencyRule&) const = default;
};

struct SynthConfig {
  std::size_t num_classes = 8;
  std::size_t actions_per_video = 5;
  std::size_t sub_actions_min = 2;
  std::size_t sub_actions_max = 3;
  std::size_t frames_min = 8;  // per sub-action
  std::size_t frames_max = 15;
  std::size_t feature_dim = 8;
  double noise = 0.3;
  std::vector<std::pair<Label, Label>> ambiguous_pairs;
  std::vector<DependencyRule> dependencies;
  std::size_t train_videos = 40;
  std::size_t test_videos = 20;
  std::uint64_t seed = 0;

  bool is_ambiguous(Label c) const {
    for (const auto& [a, b] : ambiguous_pairs) {
      if (c == a || c == b) return true;
    }
    return false;
  }

  bool is_cue(Label c) const {
    for (const auto& r : dependencies) {
      if (r.cue == c) return true;
    }
    return false;
  }

  std::vector<Label> filler_classes() const {
    std::vector<Label> out;
    for (Label c = 0; c < static_cast<Label>(num_classes); ++c) {
      if (!is_ambiguous(c) && !is_cue(c)) out.push_back(c);
    }
    return out;
  }

  void validate() const {
    const auto in_range = [&](Label c) { return c >= 0 && c < static_cast<Label>(num_classes); };
    if (num_classes < 2) throw ConfigError("synth: num_classes must be >= 2");
    if (actions_per_video < 1) throw ConfigError("synth: actions_per_video must be >= 1");
    if (sub_actions_min < 1 || sub_actions_min > sub_actions_max) throw ConfigError("synth: empty sub_actions range");
    if (frames_min < 1 || frames_min > frames_max) throw ConfigError("synth: empty frames range");
    if (feature_dim < 1) throw ConfigError("synth: feature_dim must be >= 1");
    if (!(noise >= 0.0) || !std::isfinite(noise)) throw ConfigError("synth: noise must be >= 0");
    if (train_videos < 1 || test_videos < 1) throw ConfigError("synth: each split needs at least one video");
    std::set<Label> seen;
    for (const auto& [a, b] : ambiguous_pairs) {
      if (!in_range(a) || !in_range(b) || a == b) {
        throw ConfigError("synth: ambiguous pair (" + std::to_string(a) + "," + std::to_string(b) + ") is invalid");
      }
      if (!seen.insert(a).second || !seen.insert(b).second) throw ConfigError("synth: a class is in two ambiguous pairs");
    }
    std::set<Label> cues, targets;
    for (const auto& r : dependencies) {
      if (!in_range(r.cue) || !in_range(r.target)) {
        throw ConfigError("synth: dependency " + std::to_string(r.cue) + "->" + std::to_string(r.target) +
                          " references a class outside [0, " + std::to_string(num_classes) + ")");
      }
      if (!is_ambiguous(r.target)) {
        throw ConfigError("synth: dependency target " + std::to_string(r.target) + " is not in an ambiguous pair");
      }
      if (is_ambiguous(r.cue)) throw ConfigError("synth: dependency cue " + std::to_string(r.cue) + " is ambiguous");
      if (!cues.insert(r.cue).second) throw ConfigError("synth: cue " + std::to_string(r.cue) + " used twice");
      if (!targets.insert(r.target).second) {
        throw ConfigError("synth: target " + std::to_string(r.target) + " has two cues");
      }
    }
    for (Label c : seen) {
      if (!targets.count(c)) throw ConfigError("synth: ambiguous class " + std::to_string(c) + " has no dependency rule");
    }
    const std::size_t fillers = filler_classes().size();
    if (!ambiguous_pairs.empty()) {
      if (actions_per_video < 3) throw ConfigError("synth: dependency videos need actions_per_video >= 3");
      if (actions_per_video > 3 && fillers < 2) throw ConfigError("synth: need at least two filler classes");
      if (fillers < 1) throw ConfigError("synth: need at least one filler class");
    } else if (actions_per_video > 1 && fillers < 2) {
      throw ConfigError("synth: need at least two classes outside cues and pairs");
    }
  }
};

struct SynthDataset {
  Dataset dataset;                    // splits "train" and "test"
  std::vector<Tensor> prototypes;     // per class: sub-actions x feature_dim
};

namespace detail {

inline Tensor unit_ball_point(std::size_t d, Rng& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Tensor p({d});
  double norm = 0.0;
  for (auto& v : p.data()) {
    v = n(rng);
    norm += v * v;
  }
  norm = std::sqrt(norm);
  const double radius = std::pow(u(rng), 1.0 / static_cast<double>(d));
  for (auto& v : p.data()) v *= radius / (norm > 0.0 ? norm : 1.0);
  return p;
}

inline std::size_t uniform_index(std::size_t lo, std::size_t hi, Rng& rng) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

}  // namespace detail

/// Draws the action sequence of one video.
inline Labels synth_action_sequence(const SynthConfig& cfg, Rng& rng) {
  const std::size_t A = cfg.actions_per_video;
  const std::vector<Label> fillers =
      cfg.ambiguous_pairs.empty() ? [&] {
        std::vector<Label> all;
        for (Label c = 0; c < static_cast<Label>(cfg.num_classes); ++c) all.push_back(c);
        return all;
      }()
                                  : cfg.filler_classes();
  Labels actions(A, -1);
  if (!cfg.ambiguous_pairs.empty()) {
    const auto& pair = cfg.ambiguous_pairs[detail::uniform_index(0, cfg.ambiguous_pairs.size() - 1, rng)];
    const Label target = detail::uniform_index(0, 1, rng) ? pair.second : pair.first;
    Label cue = -1;
    for (const auto& r : cfg.dependencies) {
      if (r.target == target) cue = r.cue;
    }
    const std::size_t cue_pos = detail::uniform_index(0, A - 3, rng);
    const std::size_t target_pos = detail::uniform_index(cue_pos + 2, A - 1, rng);
    actions[cue_pos] = cue;
    actions[target_pos] = target;
  }
  for (std::size_t i = 0; i < A; ++i) {
    if (actions[i] != -1) continue;
    Label c;
    do {
      c = fillers[detail::uniform_index(0, fillers.size() - 1, rng)];
    } while ((i > 0 && actions[i - 1] == c) || (i + 1 < A && actions[i + 1] == c));
    actions[i] = c;
  }
  return actions;
}

/// Generates the train and test splits. Output is a pure function of `cfg`.
inline SynthDataset synth_generate(const SynthConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  SynthDataset out;
  const std::size_t C = cfg.num_classes, d = cfg.feature_dim;
  for (std::size_t c = 0; c < C; ++c) {
    const std::size_t subs = detail::uniform_index(cfg.sub_actions_min, cfg.sub_actions_max, rng);
    Tensor protos({subs, d});
    for (std::size_t s = 0; s < subs; ++s) {
      const Tensor p = detail::unit_ball_point(d, rng);
      std::copy(p.data().begin(), p.data().end(), protos.data().begin() + s * d);
    }
    out.prototypes.push_back(std::move(protos));
  }
  for (const auto& [a, b] : cfg.ambiguous_pairs) out.prototypes[static_cast<std::size_t>(b)] = out.prototypes[static_cast<std::size_t>(a)];

  auto& ds = out.dataset;
  for (std::size_t c = 0; c < C; ++c) ds.manifest.class_names.push_back("action" + std::to_string(c));
  ds.manifest.feature_dim = d;
  std::normal_distribution<double> noise(0.0, 1.0);
  const auto make_split = [&](const std::string& name, std::size_t count) {
    Split split{name, {}};
    for (std::size_t v = 0; v < count; ++v) {
      char id[64];
      std::snprintf(id, sizeof id, "%s_%04zu", name.c_str(), v);
      SequenceSample s;
      s.id = id;
      std::vector<double> feats;
      for (Label action : synth_action_sequence(cfg, rng)) {
        const Tensor& protos = out.prototypes[static_cast<std::size_t>(action)];
        for (std::size_t sub = 0; sub < protos.rows(); ++sub) {
          const std::size_t frames = detail::uniform_index(cfg.frames_min, cfg.frames_max, rng);
          for (std::size_t f = 0; f < frames; ++f) {
            for (std::size_t k = 0; k < d; ++k) feats.push_back(protos(sub, k) + cfg.noise * noise(rng));
            s.labels.push_back(action);
          }
        }
      }
      s.features = Tensor({s.labels.size(), d}, std::move(feats));
      split.ids.push_back(s.id);
      ds.manifest.samples.push_back({s.id, "", ""});
      ds.samples.push_back(std::move(s));
    }
    ds.manifest.splits.push_back(std::move(split));
  };
  make_split("train", cfg.train_videos);
  make_split("test", cfg.test_videos);
  return out;
}

/// Fraction of frames whose label belongs to an ambiguous pair.
inline double ambiguous_fraction(std::span<const SequenceSample* const> samples, const SynthConfig& cfg) {
  std::size_t amb = 0, total = 0;
  for (const auto* s : samples) {
    for (Label l : s->labels) amb += cfg.is_ambiguous(l);
    total += s->labels.size();
  }
  return total ? static_cast<double>(amb) / static_cast<double>(total) : 0.0;
}

/// Best frame accuracy (percent) reachable from per-frame features alone when a
/// fraction p of frames lies in balanced ambiguous pairs: (1 - p/2) * 100.
inline double frame_local_ceiling(double ambiguous_frac) { return (1.0 - ambiguous_frac / 2.0) * 100.0; }

/// Frame accuracy restricted to frames whose true label is in an ambiguous pair.
inline double ambiguous_frame_accuracy(const std::vector<Labels>& pred, const std::vector<Labels>& gt,
                                       const SynthConfig& cfg) {
  std::size_t hits = 0, total = 0;
  for (std::size_t s = 0; s < gt.size(); ++s) {
    for (std::size_t t = 0; t < gt[s].size(); ++t) {
      if (!cfg.is_ambiguous(gt[s][t])) continue;
      ++total;
      hits += pred[s][t] == gt[s][t];
    }
  }
  if (!total) throw ContractError("ambiguous_frame_accuracy: no ambiguous frames");
  return 100.0 * static_cast<double>(hits) / static_cast<double>(total);
}

}  // namespace tricornet
