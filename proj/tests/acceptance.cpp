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


// Acceptance gate: prints one PASS/FAIL line per criterion, exits 1 if any fails.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "tricornet/gradcheck.hpp"
#include "tricornet/synth.hpp"
#include "tricornet/train.hpp"

namespace fs = std::filesystem;
using namespace tricornet;

namespace {

struct Outcome {
  bool passed = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v[v.size() / 2];
}

// ---- 1 ----------------------------------------------------------------------

Outcome gradient_fidelity() {
  const auto t0 = std::chrono::steady_clock::now();
  std::string detail;
  bool ok = true;
  std::size_t blocks = 0;
  for (Variant v : {Variant::kFull, Variant::kHigh, Variant::kLow, Variant::kConvOnly}) {
    const GradcheckResult r = gradcheck_variant(v, ToyDims{});
    double worst = 0.0;
    for (const auto& b : r.blocks) worst = std::max(worst, b.max_rel_error);
    blocks += r.blocks.size();
    ok = ok && r.passed;
    detail += fmt("%s max_rel=%.2e; ", to_string(v).c_str(), worst);
  }
  const double secs = seconds_since(t0);
  return {ok && secs < 120.0, detail + fmt("%zu blocks in %.1f s", blocks, secs)};
}

// ---- 2 ----------------------------------------------------------------------

Outcome equation_units() {
  std::vector<std::string> failures;

  LSTMParams p;
  for (Tensor* t : {&p.w_xi, &p.w_xf, &p.w_xo, &p.w_xc, &p.w_hi, &p.w_hf, &p.w_ho, &p.w_hc}) *t = Tensor({1, 1}, 0.5);
  for (Tensor* t : {&p.b_i, &p.b_f, &p.b_o, &p.b_c}) *t = Tensor({1});
  const double h1 = lstm_forward(Tensor::matrix({{1}}), p)[0];
  const double s = 1.0 / (1.0 + std::exp(-0.5));
  const double exact = s * std::tanh(s * std::tanh(0.5));
  // Closed form for one step with every weight 0.5 and zero bias.
  if (std::abs(h1 - exact) > 1e-6 || std::abs(h1 - 0.174270) > 1e-6) failures.push_back(fmt("lstm h1=%.8f", h1));

  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  Tensor x({40, 7});
  for (auto& v : x.data()) v = u(rng);
  const Tensor n = norm_relu(x);
  const double m = *std::max_element(x.data().begin(), x.data().end());
  const double top = *std::max_element(n.data().begin(), n.data().end());
  const bool bounded = std::all_of(n.data().begin(), n.data().end(), [](double v) { return v >= 0.0 && v < 1.0; });
  if (!bounded || std::abs(top - m / (m + kNormReluEpsilon)) > 1e-12) failures.push_back(fmt("norm_relu max=%.15f", top));

  const Tensor sm = softmax_rows(x);
  for (std::size_t r = 0; r < sm.shape()[0]; ++r) {
    double row = 0.0;
    for (std::size_t c = 0; c < sm.shape()[1]; ++c) row += sm(r, c);
    if (std::abs(row - 1.0) > 1e-12) failures.push_back(fmt("softmax row %zu sums to %.15f", r, row));
  }

  Tensor pairs({20, 3});
  for (std::size_t t = 0; t < 20; ++t)
    for (std::size_t c = 0; c < 3; ++c) pairs(t, c) = x(t / 2, c);
  if (!(upsample_repeat(max_pool_time(pairs)) == pairs)) failures.push_back("pool/upsample round trip");

  std::string detail = fmt("lstm h1=%.6f, norm_relu max=%.12f, %zu softmax rows, pool/upsample exact", h1, top,
                           sm.shape()[0]);
  for (const auto& f : failures) detail += "; FAILED " + f;
  return {failures.empty(), detail};
}

// ---- 3 ----------------------------------------------------------------------

std::vector<Labels> all_strings(std::size_t max_len, int symbols) {
  std::vector<Labels> out{{}}, frontier{{}};
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

// Recursive definition, memoized per pair.
std::size_t lev_rec(const Labels& a, std::size_t i, const Labels& b, std::size_t j, std::vector<int>& memo) {
  int& slot = memo[i * (b.size() + 1) + j];
  if (slot >= 0) return static_cast<std::size_t>(slot);
  std::size_t r;
  if (i == a.size()) r = b.size() - j;
  else if (j == b.size()) r = a.size() - i;
  else if (a[i] == b[j]) r = lev_rec(a, i + 1, b, j + 1, memo);
  else
    r = 1 + std::min({lev_rec(a, i + 1, b, j, memo), lev_rec(a, i, b, j + 1, memo), lev_rec(a, i + 1, b, j + 1, memo)});
  slot = static_cast<int>(r);
  return r;
}

Labels random_labels(std::mt19937_64& rng, std::size_t T, int classes, double switch_p) {
  std::uniform_int_distribution<int> cls(0, classes - 1);
  std::bernoulli_distribution sw(switch_p);
  Labels out{cls(rng)};
  while (out.size() < T) out.push_back(sw(rng) ? cls(rng) : out.back());
  return out;
}

Outcome metric_oracles() {
  const auto all = all_strings(6, 3);
  std::size_t mismatches = 0;
  std::vector<int> memo;
  for (const auto& a : all)
    for (const auto& b : all) {
      memo.assign((a.size() + 1) * (b.size() + 1), -1);
      mismatches += levenshtein(a, b) != lev_rec(a, 0, b, 0, memo);
    }

  const Segment a0{0, 0, 1}, b1{1, 1, 2}, c1{2, 1, 2}, c2{2, 2, 3};
  const bool edit_case = std::abs(edit_score({a0, c1}, {a0, b1, c2}) - 200.0 / 3.0) < 1e-12;
  const bool f1_case = overlap_f1({{0, 5, 15}}, {{0, 0, 10}}, 50.0) == 0.0 &&
                       overlap_f1({{0, 5, 15}}, {{0, 0, 10}}, 25.0) == 100.0;
  const bool boundary_case = overlap_f1({{0, 3, 12}}, {{0, 0, 9}}, 50.0) == 0.0;

  std::mt19937_64 rng(7);
  std::size_t violations = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto gs = segments_from_labels(random_labels(rng, 60, 4, 0.1));
    const auto ps = segments_from_labels(random_labels(rng, 60, 4, 0.15));
    double prev = 101.0;
    for (double k : {5.0, 10.0, 25.0, 40.0, 50.0, 60.0, 75.0, 90.0, 99.0}) {
      const double f = overlap_f1(ps, gs, k);
      violations += f > prev;
      prev = f;
    }
  }
  const bool ok = mismatches == 0 && edit_case && f1_case && boundary_case && violations == 0;
  return {ok, fmt("%zu string pairs, %zu Levenshtein mismatches; hand cases edit=%d f1=%d boundary=%d; "
                  "%zu monotonicity violations in 100 trials",
                  all.size() * all.size(), mismatches, edit_case, f1_case, boundary_case, violations)};
}

// ---- 4 ----------------------------------------------------------------------

Outcome overfit() {
  SynthConfig sc;
  sc.num_classes = 6;
  sc.actions_per_video = 6;
  sc.feature_dim = 16;
  sc.noise = 1.0;
  sc.frames_min = 10;
  sc.frames_max = 16;
  sc.train_videos = 5;
  sc.test_videos = 1;
  sc.seed = 4;
  const SynthDataset sd = synth_generate(sc);
  const std::vector<SequenceSample> train_set(sd.dataset.samples.begin(), sd.dataset.samples.begin() + 5);
  std::size_t t_min = SIZE_MAX, t_max = 0;
  for (const auto& s : train_set) {
    t_min = std::min(t_min, s.labels.size());
    t_max = std::max(t_max, s.labels.size());
  }

  ModelConfig mc;
  mc.variant = Variant::kFull;
  mc.conv_len = 5;
  mc.hidden = 32;
  mc.input_dim = 16;
  mc.num_classes = 6;
  mc.dropout_conv = 0.0;
  mc.dropout_lstm = 0.0;
  mc.seed = 1;
  Model model = Model::build(mc);
  TrainOptions opts;
  opts.epochs = 300;
  opts.seed = 1;
  opts.adam.lr = 1e-3;
  opts.stop_at_train_accuracy = 99.0;
  const auto t0 = std::chrono::steady_clock::now();
  const TrainReport rep = train(model, train_set, {}, opts);
  const double secs = seconds_since(t0);
  std::vector<const SequenceSample*> ptrs;
  for (const auto& s : train_set) ptrs.push_back(&s);
  const double acc = evaluate_model(model, ptrs).accuracy;
  return {acc >= 99.0 && rep.epochs.size() <= 300 && secs < 600.0,
          fmt("5 sequences T=%zu..%zu d=16 c=6 noise=1.0: train acc %.2f after %zu epochs, %.1f s", t_min, t_max, acc,
              rep.epochs.size(), secs)};
}

// ---- 5 ----------------------------------------------------------------------

Outcome dependency() {
  std::vector<double> gaps, full_acc, ceilings;
  std::string per_seed;
  for (int seed = 1; seed <= 5; ++seed) {
    SynthConfig sc;
    sc.ambiguous_pairs = {{0, 1}};
    sc.dependencies = {{2, 0}, {3, 1}};
    sc.seed = 100 + seed;
    const SynthDataset sd = synth_generate(sc);
    std::vector<SequenceSample> train_set, test_set;
    for (const auto& s : sd.dataset.samples) (s.id.rfind("train", 0) == 0 ? train_set : test_set).push_back(s);
    std::vector<const SequenceSample*> test_ptrs;
    for (const auto& s : test_set) test_ptrs.push_back(&s);
    const double ceiling = frame_local_ceiling(ambiguous_fraction(test_ptrs, sc));

    double amb[2], acc[2];
    int k = 0;
    for (Variant v : {Variant::kFull, Variant::kConvOnly}) {
      ModelConfig mc;
      mc.variant = v;
      mc.depth = 2;
      mc.conv_len = 5;
      mc.hidden = 32;
      mc.input_dim = sc.feature_dim;
      mc.num_classes = sc.num_classes;
      mc.seed = static_cast<std::uint64_t>(seed);
      Model model = Model::build(mc);
      TrainOptions opts;
      opts.epochs = 30;
      opts.seed = static_cast<std::uint64_t>(seed);
      train(model, train_set, {}, opts);
      std::vector<Labels> pred, gt;
      for (const auto& s : test_set) {
        pred.push_back(predict(model, s.features));
        gt.push_back(s.labels);
      }
      amb[k] = ambiguous_frame_accuracy(pred, gt, sc);
      acc[k] = evaluate(pred, gt).accuracy;
      ++k;
    }
    gaps.push_back(amb[0] - amb[1]);
    full_acc.push_back(acc[0]);
    ceilings.push_back(ceiling);
    per_seed += fmt(" [%d: amb %.1f vs %.1f, acc %.1f, ceil %.1f]", seed, amb[0], amb[1], acc[0], ceiling);
  }
  const double gap = median(gaps), acc = median(full_acc), ceil = median(ceilings);
  return {gap >= 10.0 && acc > ceil,
          fmt("median ambiguous gap %.1f pts, median full acc %.1f vs ceiling %.1f;", gap, acc, ceil) + per_seed};
}

// ---- 6 ----------------------------------------------------------------------

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

int run(const std::string& args) {
  const int status = std::system((std::string("'") + TRICORNET_CLI + "' " + args + " > /dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Outcome determinism() {
  const fs::path root = fs::temp_directory_path() / "tricornet_acceptance";
  fs::remove_all(root);
  fs::create_directories(root);
  std::ofstream(root / "synth.cfg") << "[synth]\nclasses = 5\nactions_per_video = 4\nframes_min = 4\nframes_max = 8\n"
                                       "feature_dim = 6\ntrain_videos = 6\ntest_videos = 2\nseed = 9\n";
  std::ofstream(root / "train.cfg") << "[data]\nmanifest = data/manifest.txt\n[model]\nvariant = full\nconv_len = 5\n"
                                       "hidden = 8\n[train]\nepochs = 4\nseed = 12\n";
  if (run("synth --config '" + (root / "synth.cfg").string() + "' --out '" + (root / "data").string() + "'") != 0)
    return {false, "synth failed"};
  for (const char* name : {"a", "b"}) {
    const int code = run("train --quiet --config '" + (root / "train.cfg").string() + "' --out '" + (root / name).string() + "'");
    if (code != 0) return {false, fmt("train run %s exited %d", name, code)};
  }
  const std::string kv_a = slurp(root / "a/report.kv"), ck_a = slurp(root / "a/checkpoint.bin");
  const bool same_kv = !kv_a.empty() && kv_a == slurp(root / "b/report.kv");
  const bool same_ck = !ck_a.empty() && ck_a == slurp(root / "b/checkpoint.bin");
  return {same_kv && same_ck, fmt("report.kv (%zu bytes) identical=%d, checkpoint.bin (%zu bytes) identical=%d",
                                  kv_a.size(), same_kv, ck_a.size(), same_ck)};
}

// ---- 7 ----------------------------------------------------------------------

Outcome shapes() {
  std::string detail;
  bool ok = true;
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(0.0, 1.0);
  for (Variant v : {Variant::kFull, Variant::kHigh, Variant::kLow, Variant::kConvOnly}) {
    ModelConfig mc;
    mc.variant = v;
    mc.depth = 2;
    mc.conv_len = 3;
    mc.hidden = 4;
    mc.input_dim = 3;
    mc.num_classes = 4;
    const Model model = Model::build(mc);
    for (std::size_t T : {1, 2, 3, 99, 100}) {
      Tensor x({T, 3});
      for (auto& e : x.data()) e = n(rng);
      const Tensor y = forward(model, x);
      const bool good = y.shape() == Shape{T, 4} &&
                        std::all_of(y.data().begin(), y.data().end(), [](double e) { return std::isfinite(e); });
      if (!good) detail += fmt("%s T=%zu gave %s; ", to_string(v).c_str(), T, shape_str(y.shape()).c_str());
      ok = ok && good;
    }
  }

  ModelConfig mc;
  mc.depth = 2;
  mc.conv_len = 3;
  mc.hidden = 4;
  mc.input_dim = 3;
  mc.num_classes = 4;
  bool width_error = false;
  try {
    forward(Model::build(mc), Tensor({10, 5}));
  } catch (const ShapeError&) {
    width_error = true;
  }

  const fs::path dir = fs::temp_directory_path() / "tricornet_acceptance_labels";
  fs::create_directories(dir);
  std::ofstream(dir / "bad.lab") << "0\n3\n4\n";
  bool label_error = false;
  try {
    read_labels(dir / "bad.lab", 4);
  } catch (const LoadError& e) {
    label_error = std::string(e.what()).find("bad.lab:3") != std::string::npos;
  }
  ok = ok && width_error && label_error;
  return {ok, detail + fmt("T in {1,2,3,99,100} for 4 variants at K=2; width mismatch ShapeError=%d; "
                           "out-of-range label LoadError with line=%d",
                           width_error, label_error)};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"gradient fidelity", gradient_fidelity}, {"layer formulas", equation_units},
      {"metric oracles", metric_oracles},       {"overfit sanity", overfit},
      {"dependency disambiguation", dependency}, {"determinism", determinism},
      {"shape robustness", shapes},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.passed;
    std::cout << (o.passed ? "PASS " : "FAIL ") << i + 1 << " " << criteria[i].first << ": " << o.detail << std::endl;
  }
  return failed ? 1 : 0;
}
