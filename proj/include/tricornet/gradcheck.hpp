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

#include <array>
#include <cstdio>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "tricornet/autodiff.hpp"
#include "tricornet/metrics.hpp"
#include "tricornet/model.hpp"
#include "tricornet/train.hpp"

namespace tricornet {

inline constexpr double kGradcheckTolerance = 1e-4;
// Step sizes tried per coordinate, largest first.
inline constexpr std::array<double, 3> kGradcheckSteps{1e-4, 1e-5, 1e-6};

struct BlockCheck {
  std::string name;
  std::size_t size = 0;
  double max_rel_error = 0.0;
  bool passed = false;
};

struct GradcheckResult {
  std::vector<BlockCheck> blocks;
  bool passed = true;
};

struct ToyDims {
  std::size_t T = 8;
  std::size_t d = 3;
  std::size_t c = 2;
  std::size_t K = 2;
  std::size_t L = 3;
  std::size_t H = 4;
  std::uint64_t seed = 0;
};

/// Finite-difference check of d(cross entropy)/d(block) for every parameter
/// block of `model`, in inference mode, at input `x` with targets `labels`.
inline GradcheckResult gradcheck_model(const Model& model, const Tensor& x, const Labels& labels,
                                       double tol = kGradcheckTolerance) {
  GradcheckResult result;
  const auto named = model.named_parameters();
  for (std::size_t block = 0; block < named.size(); ++block) {
    const ScalarFunction loss_of_block = [&, block](Tape& tape, Var value) {
      NetworkVars vars = bind(tape, model, false);
      std::size_t k = 0;
      NetworkVars::visit(vars, [&](const std::string&, Var& v) {
        if (k++ == block) v = value;
      });
      Rng rng(0);
      Var probs = forward(model, vars, tape.constant(x), false, rng);
      return cross_entropy_loss(probs, labels);
    };
    const auto report = finite_diff_report(loss_of_block, *named[block].second, kGradcheckSteps, tol);
    BlockCheck bc{named[block].first, named[block].second->size(), report.max_rel_error,
                  report.max_rel_error <= tol};
    result.passed = result.passed && bc.passed;
    result.blocks.push_back(std::move(bc));
  }
  return result;
}

inline GradcheckResult gradcheck_variant(Variant variant, const ToyDims& dims, double tol = kGradcheckTolerance) {
  ModelConfig cfg;
  cfg.variant = variant;
  cfg.depth = dims.K;
  cfg.conv_len = dims.L;
  cfg.hidden = dims.H;
  cfg.input_dim = dims.d;
  cfg.num_classes = dims.c;
  cfg.seed = dims.seed;
  const Model model = Model::build(cfg);
  Rng rng(dims.seed + 1);
  std::normal_distribution<double> n(0.0, 1.0);
  Tensor x({dims.T, dims.d});
  for (auto& v : x.data()) v = n(rng);
  Labels labels(dims.T);
  std::uniform_int_distribution<int> cls(0, static_cast<int>(dims.c) - 1);
  for (auto& l : labels) l = cls(rng);
  return gradcheck_model(model, x, labels, tol);
}

inline std::string format_gradcheck(const GradcheckResult& r, double tol = kGradcheckTolerance) {
  std::ostringstream os;
  char buf[200];
  std::snprintf(buf, sizeof buf, "%-36s %8s %14s  %s\n", "block", "size", "max_rel_err", "status");
  os << buf;
  for (const auto& b : r.blocks) {
    std::snprintf(buf, sizeof buf, "%-36s %8zu %14.3e  %s\n", b.name.c_str(), b.size, b.max_rel_error,
                  b.passed ? "PASS" : "FAIL");
    os << buf;
  }
  std::snprintf(buf, sizeof buf, "%s (tolerance %.0e)\n", r.passed ? "all blocks passed" : "GRADIENT CHECK FAILED", tol);
  os << buf;
  return os.str();
}

}  // namespace tricornet
