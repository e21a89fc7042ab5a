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
#include <cstddef>
#include <cstdio>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "tricornet/errors.hpp"

namespace tricornet {

using Label = int;
using Labels = std::vector<Label>;

/// A maximal run of one class over frames [start, end).
struct Segment {
  Label label = 0;
  std::size_t start = 0;
  std::size_t end = 0;

  std::size_t length() const { return end - start; }
  bool operator==(const Segment&) const = default;
};

/// Percentage of frames where pred == gt.
inline double frame_accuracy(std::span<const Label> pred, std::span<const Label> gt) {
  if (pred.size() != gt.size()) {
    throw ContractError("frame_accuracy: length mismatch " + std::to_string(pred.size()) + " vs " +
                        std::to_string(gt.size()));
  }
  if (gt.empty()) throw ContractError("frame_accuracy: empty sequence");
  std::size_t hits = 0;
  for (std::size_t t = 0; t < gt.size(); ++t) hits += pred[t] == gt[t];
  return 100.0 * static_cast<double>(hits) / static_cast<double>(gt.size());
}

/// Run-length encodes a label sequence. Runs of `background`, if given, are dropped.
inline std::vector<Segment> segments_from_labels(std::span<const Label> labels,
                                                 std::optional<Label> background = std::nullopt) {
  std::vector<Segment> out;
  const bool drop = background.has_value();
  const Label bg = background.value_or(0);
  std::size_t start = 0;
  for (std::size_t t = 1; t <= labels.size(); ++t) {
    if (t == labels.size() || labels[t] != labels[start]) {
      if (!drop || labels[start] != bg) out.push_back({labels[start], start, t});
      start = t;
    }
  }
  return out;
}

/// Unit-cost insert/delete/substitute distance, two-row dynamic program.
inline std::size_t levenshtein(std::span<const Label> a, std::span<const Label> b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

/// 100 * (1 - lev(pred classes, gt classes) / max(|pred|, |gt|)); 100 when both are empty.
inline double edit_score(const std::vector<Segment>& pred, const std::vector<Segment>& gt) {
  if (pred.empty() && gt.empty()) return 100.0;
  Labels p, g;
  for (const auto& s : pred) p.push_back(s.label);
  for (const auto& s : gt) g.push_back(s.label);
  const double d = static_cast<double>(levenshtein(p, g));
  return 100.0 * (1.0 - d / static_cast<double>(std::max(p.size(), g.size())));
}

inline double segment_iou(const Segment& a, const Segment& b) {
  const std::size_t lo = std::max(a.start, b.start), hi = std::min(a.end, b.end);
  const double inter = hi > lo ? static_cast<double>(hi - lo) : 0.0;
  const double uni = static_cast<double>(a.length() + b.length()) - inter;
  return inter / uni;
}

/// Segmental F1 at IoU threshold k percent. Predictions are visited in order; each
/// takes the unmatched same-class ground-truth segment of highest IoU (earliest on
/// ties) and is a true positive when that IoU is strictly above k/100.
inline double overlap_f1(const std::vector<Segment>& pred, const std::vector<Segment>& gt, double k) {
  if (!(k > 0.0 && k < 100.0)) throw ContractError("overlap_f1: threshold must be in (0, 100)");
  if (pred.empty() && gt.empty()) return 100.0;
  const double thr = k / 100.0;
  std::vector<bool> used(gt.size(), false);
  std::size_t tp = 0;
  for (const auto& p : pred) {
    std::optional<std::size_t> best;
    double best_iou = 0.0;
    for (std::size_t j = 0; j < gt.size(); ++j) {
      if (used[j] || gt[j].label != p.label) continue;
      const double iou = segment_iou(p, gt[j]);
      if (!best || iou > best_iou) {
        best = j;
        best_iou = iou;
      }
    }
    if (best && best_iou > thr) {
      used[*best] = true;
      ++tp;
    }
  }
  const std::size_t fp = pred.size() - tp, fn = gt.size() - tp;
  const double precision = pred.empty() ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
  const double recall = gt.empty() ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fn);
  if (precision + recall == 0.0) return 0.0;
  return 100.0 * 2.0 * precision * recall / (precision + recall);
}

struct EvalOptions {
  std::vector<double> thresholds{10.0, 25.0, 50.0};
  std::optional<Label> background;
  bool background_in_accuracy = true;       // background frames count toward accuracy
  bool background_in_segments = false;      // background runs count as segments for edit/F1
};

struct SequenceMetrics {
  double accuracy = 0.0;
  double edit = 0.0;
  std::vector<double> f1;  // one per threshold
  std::size_t frames = 0;
};

struct MetricsReport {
  double accuracy = 0.0;  // pooled over all frames
  double edit = 0.0;      // mean over sequences
  std::vector<double> thresholds;
  std::vector<double> f1;  // mean over sequences, one per threshold
  std::vector<SequenceMetrics> per_sequence;
};

/// Scores a corpus. Accuracy pools frames across sequences; edit and F1 are
/// computed per sequence and averaged without weighting.
inline MetricsReport evaluate(const std::vector<Labels>& pred, const std::vector<Labels>& gt,
                              const EvalOptions& opts = {}) {
  if (pred.empty() || pred.size() != gt.size()) {
    throw ContractError("evaluate: corpus mismatch (" + std::to_string(pred.size()) + " predictions, " +
                        std::to_string(gt.size()) + " references)");
  }
  MetricsReport r;
  r.thresholds = opts.thresholds;
  r.f1.assign(opts.thresholds.size(), 0.0);
  std::size_t hits = 0, frames = 0;
  std::optional<Label> seg_bg;
  if (!opts.background_in_segments && opts.background) seg_bg.emplace(*opts.background);
  for (std::size_t s = 0; s < pred.size(); ++s) {
    const auto& p = pred[s];
    const auto& g = gt[s];
    if (p.size() != g.size() || g.empty()) {
      throw ContractError("evaluate: sequence " + std::to_string(s) + " has " + std::to_string(p.size()) +
                          " predicted vs " + std::to_string(g.size()) + " reference frames");
    }
    SequenceMetrics m;
    std::size_t seq_hits = 0, seq_frames = 0;
    for (std::size_t t = 0; t < g.size(); ++t) {
      if (!opts.background_in_accuracy && opts.background && g[t] == *opts.background) continue;
      ++seq_frames;
      seq_hits += p[t] == g[t];
    }
    m.frames = seq_frames;
    m.accuracy = seq_frames ? 100.0 * static_cast<double>(seq_hits) / static_cast<double>(seq_frames) : 100.0;
    hits += seq_hits;
    frames += seq_frames;
    const auto ps = segments_from_labels(p, seg_bg);
    const auto gs = segments_from_labels(g, seg_bg);
    m.edit = edit_score(ps, gs);
    for (double k : opts.thresholds) m.f1.push_back(overlap_f1(ps, gs, k));
    r.edit += m.edit;
    for (std::size_t i = 0; i < m.f1.size(); ++i) r.f1[i] += m.f1[i];
    r.per_sequence.push_back(std::move(m));
  }
  const double n = static_cast<double>(pred.size());
  r.accuracy = frames ? 100.0 * static_cast<double>(hits) / static_cast<double>(frames) : 100.0;
  r.edit /= n;
  for (auto& f : r.f1) f /= n;
  return r;
}

inline std::string threshold_key(double k) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "f1@%g", k);
  return buf;
}

/// metric=value lines with fixed formatting, so identical inputs give identical bytes.
inline std::string format_kv(const MetricsReport& r, const std::string& prefix = "") {
  std::ostringstream os;
  char buf[64];
  const auto line = [&](const std::string& key, double v) {
    std::snprintf(buf, sizeof buf, "%.6f", v);
    os << prefix << key << '=' << buf << '\n';
  };
  line("acc", r.accuracy);
  line("edit", r.edit);
  for (std::size_t i = 0; i < r.thresholds.size(); ++i) line(threshold_key(r.thresholds[i]), r.f1[i]);
  return os.str();
}

/// Aligned table in the Acc. / Edit / F1@{...} column layout.
inline std::string format_table(const MetricsReport& r, const std::string& title = "") {
  std::ostringstream os;
  char buf[64];
  os << (title.empty() ? std::string("model") : title);
  os << "\n";
  std::snprintf(buf, sizeof buf, "%-8s%-8s", "Acc.", "Edit");
  os << buf;
  for (double k : r.thresholds) {
    std::snprintf(buf, sizeof buf, "%-10s", threshold_key(k).c_str());
    os << buf;
  }
  os << "\n";
  std::snprintf(buf, sizeof buf, "%-8.1f%-8.1f", r.accuracy, r.edit);
  os << buf;
  for (double f : r.f1) {
    std::snprintf(buf, sizeof buf, "%-10.1f", f);
    os << buf;
  }
  os << "\n";
  return os.str();
}

}  // namespace tricornet
