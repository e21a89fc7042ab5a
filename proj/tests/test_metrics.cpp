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


#include <gtest/gtest.h>

#include <functional>
#include <random>

#include "tricornet/metrics.hpp"

namespace tricornet {
namespace {

constexpr Label A = 0, B = 1, C = 2;

std::vector<Segment> segs(std::initializer_list<Segment> s) { return s; }

TEST(FrameAccuracy, HandCases) {
  EXPECT_EQ(frame_accuracy(Labels{1, 2, 3}, Labels{1, 2, 3}), 100.0);
  EXPECT_EQ(frame_accuracy(Labels{0, 0, 1, 1}, Labels{0, 1, 1, 0}), 50.0);
  EXPECT_EQ(frame_accuracy(Labels{0, 0}, Labels{1, 1}), 0.0);
  EXPECT_THROW(frame_accuracy(Labels{0}, Labels{0, 1}), ContractError);
}

TEST(Segments, RunLength) {
  EXPECT_EQ(segments_from_labels(Labels{A, A, B, B, B, A}), segs({{A, 0, 2}, {B, 2, 5}, {A, 5, 6}}));
  EXPECT_EQ(segments_from_labels(Labels{C, C, C, C}), segs({{C, 0, 4}}));
  EXPECT_EQ(segments_from_labels(Labels{9, A, A, 9}, 9), segs({{A, 1, 3}}));
  EXPECT_TRUE(segments_from_labels(Labels{}).empty());
}

TEST(EditScore, HandCases) {
  EXPECT_EQ(edit_score(segs({{A, 0, 2}, {B, 2, 3}}), segs({{A, 0, 1}, {B, 1, 3}})), 100.0);
  EXPECT_NEAR(edit_score(segs({{A, 0, 1}, {C, 1, 2}}), segs({{A, 0, 1}, {B, 1, 2}, {C, 2, 3}})), 200.0 / 3.0, 1e-12);
  EXPECT_EQ(edit_score(segs({{A, 0, 4}}), segs({{B, 0, 4}})), 0.0);
  EXPECT_EQ(edit_score({}, {}), 100.0);
}

TEST(OverlapF1, HandCases) {
  const auto same = segs({{A, 0, 3}, {B, 3, 8}, {A, 8, 9}});
  for (double k : {10.0, 25.0, 50.0, 75.0}) EXPECT_EQ(overlap_f1(same, same, k), 100.0);
  // IoU 5/15
  EXPECT_EQ(overlap_f1(segs({{A, 5, 15}}), segs({{A, 0, 10}}), 50.0), 0.0);
  EXPECT_EQ(overlap_f1(segs({{A, 5, 15}}), segs({{A, 0, 10}}), 25.0), 100.0);
  // IoU exactly 0.5 is not above 0.5
  EXPECT_EQ(overlap_f1(segs({{A, 3, 12}}), segs({{A, 0, 9}}), 50.0), 0.0);
  EXPECT_EQ(overlap_f1(segs({{A, 3, 12}}), segs({{A, 0, 9}}), 49.0), 100.0);
}

TEST(OverlapF1, PrecisionRecallArithmetic) {
  // At k=50 the C prediction (IoU 4/8) misses: P=1/2, R=1/3, F1=0.4. At k=10 it hits: F1=0.8.
  const auto gt = segs({{A, 0, 4}, {B, 4, 8}, {C, 8, 12}});
  const auto pred = segs({{A, 0, 4}, {C, 4, 12}});
  EXPECT_NEAR(overlap_f1(pred, gt, 50.0), 40.0, 1e-12);
  EXPECT_NEAR(overlap_f1(pred, gt, 10.0), 80.0, 1e-12);
}

TEST(OverlapF1, EachReferenceMatchedOnce) {
  EXPECT_NEAR(overlap_f1(segs({{A, 0, 5}, {A, 5, 10}}), segs({{A, 0, 10}}), 10.0), 100.0 * 2 * 0.5 / 1.5, 1e-12);
}

TEST(OverlapF1, ThresholdOutsideRangeThrows) {
  EXPECT_THROW(overlap_f1({}, {}, 0.0), ContractError);
  EXPECT_THROW(overlap_f1({}, {}, 100.0), ContractError);
}

// Exhaustive oracle: plain recursion, no memoization.
std::size_t lev_brute(const Labels& a, std::size_t i, const Labels& b, std::size_t j) {
  if (i == a.size()) return b.size() - j;
  if (j == b.size()) return a.size() - i;
  if (a[i] == b[j]) return lev_brute(a, i + 1, b, j + 1);
  return 1 + std::min({lev_brute(a, i + 1, b, j), lev_brute(a, i, b, j + 1), lev_brute(a, i + 1, b, j + 1)});
}

std::vector<Labels> all_strings(std::size_t max_len, int symbols) {
  std::vector<Labels> out{{}};
  std::vector<Labels> frontier{{}};
  for (std::size_t len = 1; len <= max_len; ++len) {
    std::vector<Labels> next;
    for (const auto& s : frontier)
      for (int c = 0; c < symbols; ++c) {
        Labels t = s;
        t.push_back(c);
        next.push_back(t);
      }
    out.insert(out.end(), next.begin(), next.end());
    frontier = std::move(next);
  }
  return out;
}

// Same recursion with a memo table, so every pair up to length 6 stays cheap.
std::size_t lev_memo(const Labels& a, std::size_t i, const Labels& b, std::size_t j, std::vector<int>& memo) {
  int& slot = memo[i * (b.size() + 1) + j];
  if (slot >= 0) return static_cast<std::size_t>(slot);
  std::size_t r;
  if (i == a.size()) {
    r = b.size() - j;
  } else if (j == b.size()) {
    r = a.size() - i;
  } else if (a[i] == b[j]) {
    r = lev_memo(a, i + 1, b, j + 1, memo);
  } else {
    r = 1 + std::min({lev_memo(a, i + 1, b, j, memo), lev_memo(a, i, b, j + 1, memo),
                      lev_memo(a, i + 1, b, j + 1, memo)});
  }
  slot = static_cast<int>(r);
  return r;
}

TEST(Levenshtein, PlainRecursionUpToLengthFour) {
  const auto small = all_strings(4, 3);
  for (const auto& a : small)
    for (const auto& b : small) ASSERT_EQ(levenshtein(a, b), lev_brute(a, 0, b, 0));
}

TEST(Levenshtein, ExhaustiveUpToLengthSix) {
  const auto all = all_strings(6, 3);
  ASSERT_EQ(all.size(), 1093u);
  std::vector<int> memo;
  for (const auto& a : all)
    for (const auto& b : all) {
      memo.assign((a.size() + 1) * (b.size() + 1), -1);
      ASSERT_EQ(levenshtein(a, b), lev_memo(a, 0, b, 0, memo));
    }
}

Labels random_labels(std::mt19937_64& rng, std::size_t T, int classes, double switch_p) {
  std::uniform_int_distribution<int> cls(0, classes - 1);
  std::bernoulli_distribution sw(switch_p);
  Labels out{cls(rng)};
  while (out.size() < T) out.push_back(sw(rng) ? cls(rng) : out.back());
  return out;
}

TEST(OverlapF1, MonotoneInThreshold) {
  std::mt19937_64 rng(7);
  const std::vector<double> ks{5, 10, 25, 40, 50, 60, 75, 90, 99};
  for (int trial = 0; trial < 100; ++trial) {
    const Labels gt = random_labels(rng, 60, 4, 0.1);
    const Labels pred = random_labels(rng, 60, 4, 0.15);
    const auto gs = segments_from_labels(gt), ps = segments_from_labels(pred);
    double prev = 101.0;
    for (double k : ks) {
      const double f = overlap_f1(ps, gs, k);
      EXPECT_LE(f, prev) << "trial " << trial << " k " << k;
      prev = f;
    }
  }
}

TEST(Invariance, RelabelingAndTimeScaling) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 30; ++trial) {
    const Labels gt = random_labels(rng, 40, 3, 0.1), pred = random_labels(rng, 40, 3, 0.2);
    const auto score = [](const Labels& p, const Labels& g) { return evaluate({p}, {g}); };
    const auto base = score(pred, gt);
    Labels rp = pred, rg = gt, sp, sg;
    for (auto& l : rp) l = (l + 1) % 3;
    for (auto& l : rg) l = (l + 1) % 3;
    for (Label l : pred) sp.insert(sp.end(), 3, l);
    for (Label l : gt) sg.insert(sg.end(), 3, l);
    for (const auto& r : {score(rp, rg), score(sp, sg)}) {
      EXPECT_NEAR(r.accuracy, base.accuracy, 1e-9);
      EXPECT_NEAR(r.edit, base.edit, 1e-9);
      for (std::size_t i = 0; i < r.f1.size(); ++i) EXPECT_NEAR(r.f1[i], base.f1[i], 1e-9);
    }
  }
}

TEST(Evaluate, SingleSequenceEqualsPerSequence) {
  const Labels g{0, 0, 1, 1, 2, 2, 2}, p{0, 1, 1, 1, 2, 2, 0};
  const auto r = evaluate({p}, {g});
  ASSERT_EQ(r.per_sequence.size(), 1u);
  EXPECT_EQ(r.accuracy, r.per_sequence[0].accuracy);
  EXPECT_EQ(r.edit, r.per_sequence[0].edit);
  EXPECT_EQ(r.f1, r.per_sequence[0].f1);
  EXPECT_EQ(r.accuracy, frame_accuracy(p, g));
}

TEST(Evaluate, AccuracyPoolsFrames) {
  const Labels g1(10, 1), g2(30, 2);
  const Labels p1(10, 1), p2(30, 0);
  const auto r = evaluate({p1, p2}, {g1, g2});
  EXPECT_EQ(r.accuracy, 25.0);
  EXPECT_EQ(r.edit, 50.0);
}

TEST(Evaluate, BackgroundConventions) {
  const Labels g{9, 9, 1, 1, 9, 2, 2, 9}, p{1, 9, 1, 1, 9, 2, 2, 2};
  EvalOptions o;
  o.background = 9;
  const auto r = evaluate({p}, {g}, o);
  EXPECT_EQ(r.accuracy, 75.0);
  // Without background runs: pred segments [1, 1, 2] vs gt [1, 2].
  EXPECT_NEAR(r.edit, 100.0 * (1.0 - 1.0 / 3.0), 1e-12);
  o.background_in_accuracy = false;
  EXPECT_EQ(evaluate({p}, {g}, o).accuracy, 100.0);
  o.background_in_segments = true;
  EXPECT_LT(evaluate({p}, {g}, o).edit, 100.0);
}

TEST(Evaluate, CorpusErrors) {
  EXPECT_THROW(evaluate({}, {}), ContractError);
  EXPECT_THROW(evaluate({Labels{0}}, {Labels{0}, Labels{1}}), ContractError);
  EXPECT_THROW(evaluate({Labels{0, 1}}, {Labels{0}}), ContractError);
}

TEST(Format, KeyValueSchemaAndStability) {
  const auto r = evaluate({Labels{0, 0, 1}}, {Labels{0, 1, 1}});
  const std::string kv = format_kv(r);
  EXPECT_EQ(kv, format_kv(evaluate({Labels{0, 0, 1}}, {Labels{0, 1, 1}})));
  for (const char* key : {"acc=", "edit=", "f1@10=", "f1@25=", "f1@50="}) EXPECT_NE(kv.find(key), std::string::npos) << key;
  const std::string table = format_table(r, "full");
  EXPECT_NE(table.find("Acc."), std::string::npos);
  EXPECT_NE(table.find("f1@50"), std::string::npos);
}

}  // namespace
}  // namespace tricornet
