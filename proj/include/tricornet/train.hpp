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
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "tricornet/autodiff.hpp"
#include "tricornet/data.hpp"
#include "tricornet/errors.hpp"
#include "tricornet/layers.hpp"
#include "tricornet/metrics.hpp"
#include "tricornet/model.hpp"
#include "tricornet/tensor.hpp"

namespace tricornet {

inline constexpr double kLogFloor = 1e-12;

/// Masked mean categorical cross entropy over frames:
///   -(1/|mask|) * sum_{t in mask} ln(probs[t][labels[t]] + 1e-12)
/// An empty `mask` span means every frame counts.
inline Var cross_entropy_loss(Var probs, std::span<const Label> labels, std::span<const std::uint8_t> mask = {}) {
  const Tensor& p = probs.value();
  if (p.rank() != 2 || p.rows() != labels.size()) {
    throw ShapeError("cross_entropy_loss: probabilities " + shape_str(p.shape()) + " vs " +
                     std::to_string(labels.size()) + " labels");
  }
  if (!mask.empty() && mask.size() != labels.size()) throw ShapeError("cross_entropy_loss: mask length mismatch");
  const std::size_t c = p.cols();
  std::vector<std::size_t> frames;
  for (std::size_t t = 0; t < labels.size(); ++t) {
    if (labels[t] < 0 || static_cast<std::size_t>(labels[t]) >= c) {
      throw ContractError("cross_entropy_loss: label " + std::to_string(labels[t]) + " at frame " +
                          std::to_string(t) + " outside [0, " + std::to_string(c) + ")");
    }
    if (mask.empty() || mask[t]) frames.push_back(t * c + static_cast<std::size_t>(labels[t]));
  }
  if (frames.empty()) throw ContractError("cross_entropy_loss: mask selects no frames");
  const double n = static_cast<double>(frames.size());
  double loss = 0.0;
  for (auto k : frames) loss -= std::log(p[k] + kLogFloor);
  const NodeId pi = probs.id();
  return probs.tape().record(Tensor::scalar(loss / n), {pi}, [pi, frames = std::move(frames), n](Tape& t, NodeId self) {
    const double g = t.grad(self)[0];
    const Tensor& pv = t.value(pi);
    Tensor& gp = t.grad_ref(pi);
    for (auto k : frames) gp[k] -= g / (n * (pv[k] + kLogFloor));
  });
}

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  AdamOptions options;
  std::uint64_t step = 0;
  std::vector<Tensor> m;
  std::vector<Tensor> v;
};

/// One bias-corrected Adam update, in place. Moment buffers are created on first use.
inline void adam_step(std::span<Tensor* const> params, std::span<const Tensor> grads, AdamState& s) {
  if (params.size() != grads.size()) throw ShapeError("adam_step: parameter and gradient counts differ");
  if (s.m.empty()) {
    for (const Tensor* p : params) {
      s.m.emplace_back(p->shape());
      s.v.emplace_back(p->shape());
    }
  }
  if (s.m.size() != params.size()) throw ShapeError("adam_step: state does not match parameters");
  s.step += 1;
  const auto& o = s.options;
  const double t = static_cast<double>(s.step);
  const double c1 = 1.0 - std::pow(o.beta1, t);
  const double c2 = 1.0 - std::pow(o.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor& p = *params[k];
    const Tensor& g = grads[k];
    if (p.shape() != g.shape() || s.m[k].shape() != p.shape()) {
      throw ShapeError("adam_step: shape mismatch for parameter " + std::to_string(k));
    }
    auto m = s.m[k].data();
    auto v = s.v[k].data();
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = o.beta1 * m[i] + (1.0 - o.beta1) * g[i];
      v[i] = o.beta2 * v[i] + (1.0 - o.beta2) * g[i] * g[i];
      const double mhat = m[i] / c1;
      const double vhat = v[i] / c2;
      p[i] -= o.lr * mhat / (std::sqrt(vhat) + o.eps);
    }
  }
}

/// Per-frame argmax of the inference-mode output; ties go to the lowest class id.
inline Labels argmax_rows(const Tensor& probs) {
  Labels out(probs.rows());
  for (std::size_t t = 0; t < probs.rows(); ++t) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < probs.cols(); ++k) {
      if (probs(t, k) > probs(t, best)) best = k;
    }
    out[t] = static_cast<Label>(best);
  }
  return out;
}

inline Labels predict(const Model& m, const Tensor& features) { return argmax_rows(forward(m, features)); }

inline MetricsReport evaluate_model(const Model& m, std::span<const SequenceSample* const> samples,
                                    const EvalOptions& opts = {}) {
  std::vector<Labels> pred, gt;
  for (const auto* s : samples) {
    pred.push_back(predict(m, s->features));
    gt.push_back(s->labels);
  }
  return evaluate(pred, gt, opts);
}

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double loss = 0.0;      // mean over training sequences
  double train_accuracy = 0.0;
  std::optional<MetricsReport> validation;
};

struct TrainOptions {
  std::size_t epochs = 200;
  AdamOptions adam;
  std::uint64_t seed = 0;
  EvalOptions eval;
  // Stops early once inference-mode frame accuracy on the training set reaches this.
  std::optional<double> stop_at_train_accuracy;
  std::function<void(const EpochRecord&)> on_epoch;
};

struct TrainReport {
  std::optional<MetricsReport> initial_validation;
  std::vector<EpochRecord> epochs;
  double wall_seconds = 0.0;
  std::uint64_t seed = 0;
};

/// Collects gradients in the model's parameter order.
inline std::vector<Tensor> gather_gradients(const NetworkVars& vars, const GradientMap& grads) {
  std::vector<Tensor> out;
  NetworkVars::visit(vars, [&](const std::string&, const Var& v) { out.push_back(grads.at(v.id())); });
  return out;
}

/// Trains one sequence per Adam update. Each epoch shuffles the training
/// sequences with the seeded generator, which also drives dropout.
inline TrainReport train(Model& model, std::span<const SequenceSample* const> train_set,
                         std::span<const SequenceSample* const> val_set, const TrainOptions& opts) {
  const auto& cfg = model.config();
  for (const auto* s : train_set) {
    if (s->features.rank() != 2 || s->features.cols() != cfg.input_dim) {
      throw ShapeError("train: sample '" + s->id + "' has features " + shape_str(s->features.shape()) +
                       ", model expects width " + std::to_string(cfg.input_dim));
    }
  }
  const auto started = std::chrono::steady_clock::now();
  TrainReport report;
  report.seed = opts.seed;
  if (!val_set.empty()) report.initial_validation = evaluate_model(model, val_set, opts.eval);

  Rng rng(opts.seed);
  AdamState adam{opts.adam, 0, {}, {}};
  std::vector<Tensor*> params;
  for (auto& [name, t] : model.named_parameters()) params.push_back(t);
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);

  for (std::size_t epoch = 1; epoch <= opts.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    EpochRecord rec;
    rec.epoch = epoch;
    std::size_t hits = 0, frames = 0;
    for (std::size_t idx : order) {
      const SequenceSample& s = *train_set[idx];
      Tape tape;
      const NetworkVars vars = bind(tape, model, true);
      Var probs = forward(model, vars, tape.constant(s.features), true, rng);
      const Labels guess = argmax_rows(probs.value());
      for (std::size_t t = 0; t < guess.size(); ++t) hits += guess[t] == s.labels[t];
      frames += guess.size();
      Var loss = cross_entropy_loss(probs, s.labels, s.mask);
      const double lv = loss.value()[0];
      const GradientMap grads = tape.backward(loss);
      const auto g = gather_gradients(vars, grads);
      const bool finite = std::isfinite(lv) && std::all_of(g.begin(), g.end(), all_finite);
      if (!finite) {
        throw DivergenceError("training diverged at epoch " + std::to_string(epoch) + ", sequence '" + s.id +
                              "': non-finite " + (std::isfinite(lv) ? "gradient" : "loss"));
      }
      adam_step(params, g, adam);
      for (const Tensor* p : params) {
        if (!all_finite(*p)) {
          throw DivergenceError("training diverged at epoch " + std::to_string(epoch) + ", sequence '" + s.id +
                                "': non-finite parameter after update");
        }
      }
      rec.loss += lv;
    }
    rec.loss /= static_cast<double>(std::max<std::size_t>(train_set.size(), 1));
    rec.train_accuracy = frames ? 100.0 * static_cast<double>(hits) / static_cast<double>(frames) : 0.0;
    if (!val_set.empty()) rec.validation = evaluate_model(model, val_set, opts.eval);
    report.epochs.push_back(rec);
    if (opts.on_epoch) opts.on_epoch(report.epochs.back());
    if (opts.stop_at_train_accuracy && !train_set.empty() &&
        evaluate_model(model, train_set, opts.eval).accuracy >= *opts.stop_at_train_accuracy) {
      break;
    }
  }
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return report;
}

inline TrainReport train(Model& model, const std::vector<SequenceSample>& train_set,
                         const std::vector<SequenceSample>& val_set, const TrainOptions& opts) {
  std::vector<const SequenceSample*> tr, va;
  for (const auto& s : train_set) tr.push_back(&s);
  for (const auto& s : val_set) va.push_back(&s);
  return train(model, tr, va, opts);
}

// ---- report serialization ----------------------------------------------------------

/// key=value lines; no timing information, so equal runs give equal bytes.
inline std::string format_kv(const TrainReport& r) {
  std::ostringstream os;
  char buf[64];
  os << "seed=" << r.seed << "\n";
  os << "epochs=" << r.epochs.size() << "\n";
  if (r.initial_validation) os << format_kv(*r.initial_validation, "initial.val.");
  for (const auto& e : r.epochs) {
    const std::string p = "epoch." + std::to_string(e.epoch) + ".";
    std::snprintf(buf, sizeof buf, "%.17g", e.loss);
    os << p << "loss=" << buf << "\n";
    std::snprintf(buf, sizeof buf, "%.6f", e.train_accuracy);
    os << p << "train_acc=" << buf << "\n";
    if (e.validation) os << format_kv(*e.validation, p + "val.");
  }
  if (!r.epochs.empty()) {
    const auto& last = r.epochs.back();
    std::snprintf(buf, sizeof buf, "%.17g", last.loss);
    os << "final.loss=" << buf << "\n";
    if (last.validation) os << format_kv(*last.validation, "final.val.");
  }
  return os.str();
}

inline std::string format_table(const TrainReport& r) {
  std::ostringstream os;
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-7s%-14s%-11s%-9s%-9s%-9s%-9s%-9s\n", "epoch", "loss", "train_acc", "val_acc",
                "edit", "f1@10", "f1@25", "f1@50");
  os << buf;
  const auto row = [&](std::size_t epoch, double loss, double tacc, const std::optional<MetricsReport>& v) {
    if (epoch == 0) {
      std::snprintf(buf, sizeof buf, "%-7s%-14s%-11s", "init", "-", "-");
    } else {
      std::snprintf(buf, sizeof buf, "%-7zu%-14.6f%-11.2f", epoch, loss, tacc);
    }
    os << buf;
    if (v) {
      std::snprintf(buf, sizeof buf, "%-9.2f%-9.2f", v->accuracy, v->edit);
      os << buf;
      for (double f : v->f1) {
        std::snprintf(buf, sizeof buf, "%-9.2f", f);
        os << buf;
      }
    }
    os << "\n";
  };
  if (r.initial_validation) row(0, 0.0, 0.0, r.initial_validation);
  for (const auto& e : r.epochs) row(e.epoch, e.loss, e.train_accuracy, e.validation);
  std::snprintf(buf, sizeof buf, "wall time: %.2f s\n", r.wall_seconds);
  os << buf;
  return os.str();
}

}  // namespace tricornet
