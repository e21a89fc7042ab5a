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

#include <cstdio>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "tricornet/errors.hpp"
#include "tricornet/metrics.hpp"

namespace tricornet {

inline char class_glyph(Label c) {
  static constexpr char kGlyphs[] = "0123456789ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz";
  return c >= 0 && c < static_cast<Label>(sizeof kGlyphs - 1) ? kGlyphs[c] : '?';
}

inline std::string glyph_row(std::span<const Label> labels) {
  std::string row;
  row.reserve(labels.size());
  for (Label l : labels) row.push_back(class_glyph(l));
  return row;
}

/// Text stand-in for a segmentation ribbon plot: aligned ground-truth and
/// prediction rows (one glyph per frame), then one summary line per
/// ground-truth segment with the share of its frames predicted correctly.
inline std::string export_timeline(std::span<const Label> pred, std::span<const Label> gt,
                                   const std::vector<std::string>& class_names) {
  if (pred.empty() || gt.empty()) throw ContractError("export_timeline: empty label sequence");
  if (pred.size() != gt.size()) {
    throw ContractError("export_timeline: " + std::to_string(pred.size()) + " predicted vs " +
                        std::to_string(gt.size()) + " reference frames");
  }
  const auto name = [&](Label c) {
    return c >= 0 && static_cast<std::size_t>(c) < class_names.size() ? class_names[static_cast<std::size_t>(c)]
                                                                     : std::to_string(c);
  };
  std::ostringstream os;
  os << "gt   | " << glyph_row(gt) << "\n";
  os << "pred | " << glyph_row(pred) << "\n";
  os << "\n";
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-4s %-20s %8s %8s %8s %8s\n", "seg", "class", "start", "end", "frames", "agree%");
  os << buf;
  std::size_t index = 0;
  for (const auto& s : segments_from_labels(gt)) {
    std::size_t hits = 0;
    for (std::size_t t = s.start; t < s.end; ++t) hits += pred[t] == gt[t];
    std::snprintf(buf, sizeof buf, "%-4zu %-20s %8zu %8zu %8zu %8.1f\n", index++,
                  (std::string(1, class_glyph(s.label)) + " " + name(s.label)).c_str(), s.start, s.end, s.length(),
                  100.0 * static_cast<double>(hits) / static_cast<double>(s.length()));
    os << buf;
  }
  return os.str();
}

/// Prediction-only variant used when no reference labels are available.
inline std::string export_timeline(std::span<const Label> pred, const std::vector<std::string>& class_names) {
  if (pred.empty()) throw ContractError("export_timeline: empty label sequence");
  std::ostringstream os;
  os << "pred | " << glyph_row(pred) << "\n\n";
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-4s %-20s %8s %8s %8s\n", "seg", "class", "start", "end", "frames");
  os << buf;
  std::size_t index = 0;
  for (const auto& s : segments_from_labels(pred)) {
    const std::string label = std::string(1, class_glyph(s.label)) + " " +
                              (static_cast<std::size_t>(s.label) < class_names.size()
                                   ? class_names[static_cast<std::size_t>(s.label)]
                                   : std::to_string(s.label));
    std::snprintf(buf, sizeof buf, "%-4zu %-20s %8zu %8zu %8zu\n", index++, label.c_str(), s.start, s.end, s.length());
    os << buf;
  }
  return os.str();
}

}  // namespace tricornet
