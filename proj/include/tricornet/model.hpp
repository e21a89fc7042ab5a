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
#include <cstddef>
#include <cstdint>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "tricornet/autodiff.hpp"
#include "tricornet/errors.hpp"
#include "tricornet/layers.hpp"
#include "tricornet/tensor.hpp"

namespace tricornet {

enum class Variant {
  kFull,      // conv encoder, Bi-LSTM decoder
  kHigh,      // conv encoder and decoder, Bi-LSTM at the middle layer
  kLow,       // conv encoder and decoder, Bi-LSTM only in the last decoder layer
  kConvOnly,  // High without the middle Bi-LSTM; recurrent-free baseline
};

inline std::string to_string(Variant v) {
  switch (v) {
    case Variant::kFull: return "full";
    case Variant::kHigh: return "high";
    case Variant::kLow: return "low";
    case Variant::kConvOnly: return "conv_only";
  }
  return "?";
}

inline Variant parse_variant(const std::string& s) {
  if (s == "full") return Variant::kFull;
  if (s == "high") return Variant::kHigh;
  if (s == "low") return Variant::kLow;
  if (s == "conv_only" || s == "convonly") return Variant::kConvOnly;
  throw ConfigError("unknown variant '" + s + "' (expected full, high, low or conv_only)");
}

inline constexpr std::size_t kMaxDepth = 4;

struct ModelConfig {
  std::size_t depth = 2;  // K: encoder and decoder layers
  std::size_t conv_len = 30;
  std::size_t hidden = 64;  // per LSTM direction, shared by every Bi-LSTM layer
  std::size_t num_classes = 2;
  std::size_t input_dim = 1;
  Variant variant = Variant::kFull;
  double dropout_conv = 0.3;
  double dropout_lstm = 0.3;
  std::uint64_t seed = 0;

  /// Filters of encoder layer i (1-based): 32 + 32 i.
  static std::size_t filters(std::size_t i) { return 32 + 32 * i; }

  std::size_t time_multiple() const { return std::size_t{1} << depth; }

  void validate() const {
    if (depth < 1 || depth > kMaxDepth) throw ConfigError("depth must be in [1, 4], got " + std::to_string(depth));
    if (conv_len < 1) throw ConfigError("conv_len must be >= 1");
    if (hidden < 1) throw ConfigError("hidden must be >= 1");
    if (num_classes < 2) throw ConfigError("num_classes must be >= 2");
    if (input_dim < 1) throw ConfigError("input_dim must be >= 1");
    for (double r : {dropout_conv, dropout_lstm}) {
      if (!(r >= 0.0 && r < 1.0)) throw ConfigError("dropout rates must be in [0, 1)");
    }
  }

  bool operator==(const ModelConfig&) const = default;
};

template <typename T>
using DecoderLayerT = std::variant<Conv1DParamsT<T>, BiLSTMParamsT<T>>;

/// Every trainable block of a network, in wiring order.
template <typename T>
struct NetworkParamsT {
  std::vector<Conv1DParamsT<T>> encoder;
  std::optional<BiLSTMParamsT<T>> middle;
  std::vector<DecoderLayerT<T>> decoder;
  DenseParamsT<T> output;

  // Names look like "encoder.1.conv.kernels", "middle.bilstm.fwd.W_xi", "output.W_d".
  template <typename Self, typename F>
  static void visit(Self& self, F&& f) {
    const auto prefixed = [&](const std::string& prefix) {
      return [&f, prefix](const std::string& n, auto& v) { f(prefix + n, v); };
    };
    for (std::size_t i = 0; i < self.encoder.size(); ++i) {
      Conv1DParamsT<T>::visit(self.encoder[i], prefixed("encoder." + std::to_string(i + 1) + ".conv."));
    }
    if (self.middle) BiLSTMParamsT<T>::visit(*self.middle, prefixed("middle.bilstm."));
    for (std::size_t i = 0; i < self.decoder.size(); ++i) {
      const std::string base = "decoder." + std::to_string(i + 1);
      std::visit(
          [&](auto& layer) {
            using L = std::remove_cvref_t<decltype(layer)>;
            if constexpr (std::is_same_v<L, Conv1DParamsT<T>>) {
              L::visit(layer, prefixed(base + ".conv."));
            } else {
              L::visit(layer, prefixed(base + ".bilstm."));
            }
          },
          self.decoder[i]);
    }
    DenseParamsT<T>::visit(self.output, prefixed("output."));
  }
};

using NetworkParams = NetworkParamsT<Tensor>;
using NetworkVars = NetworkParamsT<Var>;

namespace detail {

inline Tensor glorot(Shape shape, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> u(-limit, limit);
  Tensor t(std::move(shape));
  for (auto& v : t.data()) v = u(rng);
  return t;
}

inline Conv1DParams init_conv(std::size_t in, std::size_t filters, std::size_t len, Rng& rng) {
  return {glorot({filters, in, len}, in * len, filters * len, rng), Tensor({filters})};
}

inline LSTMParams init_lstm(std::size_t in, std::size_t hidden, Rng& rng) {
  LSTMParams p;
  for (Tensor* w : {&p.w_xi, &p.w_xf, &p.w_xo, &p.w_xc}) *w = glorot({hidden, in}, in, hidden, rng);
  for (Tensor* w : {&p.w_hi, &p.w_hf, &p.w_ho, &p.w_hc}) *w = glorot({hidden, hidden}, hidden, hidden, rng);
  p.b_i = Tensor({hidden});
  p.b_f = Tensor({hidden}, 1.0);
  p.b_o = Tensor({hidden});
  p.b_c = Tensor({hidden});
  return p;
}

inline BiLSTMParams init_bilstm(std::size_t in, std::size_t hidden, Rng& rng) {
  BiLSTMParams p;
  p.fwd = init_lstm(in, hidden, rng);
  p.bwd = init_lstm(in, hidden, rng);
  return p;
}

}  // namespace detail

/// A configured network and its parameter values.
class Model {
 public:
  /// Builds and initializes a network. Conv, dense and LSTM weight blocks are
  /// Glorot-uniform; LSTM forget-gate biases start at 1, every other bias at 0.
  static Model build(const ModelConfig& config) {
    config.validate();
    Model m;
    m.config_ = config;
    Rng rng(config.seed);
    const std::size_t K = config.depth, L = config.conv_len, H = config.hidden;
    auto& p = m.params_;

    std::size_t width = config.input_dim;
    for (std::size_t i = 1; i <= K; ++i) {
      p.encoder.push_back(detail::init_conv(width, ModelConfig::filters(i), L, rng));
      width = ModelConfig::filters(i);
    }
    if (config.variant == Variant::kHigh) {
      p.middle = detail::init_bilstm(width, H, rng);
      width = 2 * H;
    }
    for (std::size_t i = 1; i <= K; ++i) {
      if (m.decoder_is_recurrent(i)) {
        p.decoder.emplace_back(detail::init_bilstm(width, H, rng));
        width = 2 * H;
      } else {
        const std::size_t f = ModelConfig::filters(K + 1 - i);
        p.decoder.emplace_back(detail::init_conv(width, f, L, rng));
        width = f;
      }
    }
    p.output = {detail::glorot({config.num_classes, width}, width, config.num_classes, rng),
                Tensor({config.num_classes})};
    return m;
  }

  const ModelConfig& config() const noexcept { return config_; }
  NetworkParams& params() noexcept { return params_; }
  const NetworkParams& params() const noexcept { return params_; }

  /// True when decoder layer i (1-based) is a Bi-LSTM layer for this variant.
  bool decoder_is_recurrent(std::size_t i) const {
    switch (config_.variant) {
      case Variant::kFull: return true;
      case Variant::kLow: return i == config_.depth;
      default: return false;
    }
  }

  std::vector<std::pair<std::string, Tensor*>> named_parameters() {
    std::vector<std::pair<std::string, Tensor*>> out;
    NetworkParams::visit(params_, [&](const std::string& n, Tensor& t) { out.emplace_back(n, &t); });
    return out;
  }

  std::vector<std::pair<std::string, const Tensor*>> named_parameters() const {
    std::vector<std::pair<std::string, const Tensor*>> out;
    NetworkParams::visit(params_, [&](const std::string& n, const Tensor& t) { out.emplace_back(n, &t); });
    return out;
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& [name, t] : named_parameters()) n += t->size();
    return n;
  }

 private:
  ModelConfig config_;
  NetworkParams params_;
};

inline Model build(const ModelConfig& config) { return Model::build(config); }

/// Places every parameter of `m` on the tape, in visit order.
inline NetworkVars bind(Tape& tape, const Model& m, bool requires_grad) {
  const auto& p = m.params();
  NetworkVars v;
  for (const auto& e : p.encoder) v.encoder.push_back(bind(tape, e, requires_grad));
  if (p.middle) v.middle = bind(tape, *p.middle, requires_grad);
  for (const auto& d : p.decoder) {
    std::visit([&](const auto& layer) { v.decoder.emplace_back(bind(tape, layer, requires_grad)); }, d);
  }
  v.output = bind(tape, p.output, requires_grad);
  return v;
}

inline std::size_t padded_length(std::size_t T, std::size_t multiple) {
  return (T + multiple - 1) / multiple * multiple;
}

/// Full network on a bound parameter set: X (T x d) -> per-frame class
/// probabilities (T x c). The time axis is padded to a multiple of 2^K by
/// repeating the last frame and the output is trimmed back to T.
///
/// Dropout runs between consecutive conv layers and between consecutive Bi-LSTM
/// layers; nothing is dropped right before the output layer.
inline Var forward(const ModelConfig& cfg, const NetworkVars& p, Var x, bool training, Rng& rng) {
  const Tensor& xv = x.value();
  if (xv.rank() != 2 || xv.cols() != cfg.input_dim) {
    throw ShapeError("forward: features " + shape_str(xv.shape()) + " do not match input_dim " +
                     std::to_string(cfg.input_dim));
  }
  const std::size_t T = xv.rows();
  const std::size_t K = cfg.depth;
  Var h = pad_time_repeat_last(x, padded_length(T, cfg.time_multiple()));

  for (std::size_t i = 0; i < K; ++i) {
    h = norm_relu(conv1d_same(h, p.encoder[i]));
    h = spatial_dropout(h, cfg.dropout_conv, rng, training);
    h = max_pool_time(h);
  }
  if (p.middle) h = bilstm(h, *p.middle);
  for (std::size_t i = 0; i < K; ++i) {
    const bool last = i + 1 == K;
    h = upsample_repeat(h);
    if (const auto* conv = std::get_if<Conv1DVars>(&p.decoder[i])) {
      h = norm_relu(conv1d_same(h, *conv));
      if (!last) h = spatial_dropout(h, cfg.dropout_conv, rng, training);
    } else {
      h = bilstm(h, std::get<BiLSTMVars>(p.decoder[i]));
      if (!last) h = dropout(h, cfg.dropout_lstm, rng, training);
    }
  }
  Var probs = time_softmax_dense(h, p.output);
  return probs.value().rows() == T ? probs : slice(probs, 0, 0, T);
}

inline Var forward(const Model& m, const NetworkVars& p, Var x, bool training, Rng& rng) {
  return forward(m.config(), p, x, training, rng);
}

/// Inference-mode forward pass (no dropout, no gradients).
inline Tensor forward(const Model& m, const Tensor& x) {
  Tape tape;
  Rng rng(0);
  const NetworkVars p = bind(tape, m, false);
  Tensor out = forward(m, p, tape.constant(x), false, rng).value();
  return out;
}

// ---- description ----------------------------------------------------------------

struct LayerInfo {
  std::string name;
  std::string type;
  Shape output_shape;
  std::size_t parameters = 0;
};

/// Layer table of the network at a reference sequence length.
inline std::vector<LayerInfo> describe(const Model& m, std::size_t reference_T = 100) {
  const auto& cfg = m.config();
  const auto& p = m.params();
  const auto count = [](const auto& block) {
    std::size_t n = 0;
    std::remove_cvref_t<decltype(block)>::visit(block, [&](const std::string&, const Tensor& t) { n += t.size(); });
    return n;
  };
  std::vector<LayerInfo> rows;
  std::size_t T = padded_length(reference_T, cfg.time_multiple());
  rows.push_back({"input", "input", {reference_T, cfg.input_dim}, 0});
  if (T != reference_T) rows.push_back({"pad", "pad_repeat_last", {T, cfg.input_dim}, 0});
  for (std::size_t i = 0; i < cfg.depth; ++i) {
    const std::string base = "encoder." + std::to_string(i + 1);
    const std::size_t F = p.encoder[i].kernels.dim(0);
    rows.push_back({base + ".conv", "conv1d+norm_relu", {T, F}, count(p.encoder[i])});
    T /= 2;
    rows.push_back({base + ".pool", "max_pool_time", {T, F}, 0});
  }
  if (p.middle) rows.push_back({"middle.bilstm", "bilstm", {T, 2 * cfg.hidden}, count(*p.middle)});
  for (std::size_t i = 0; i < cfg.depth; ++i) {
    const std::string base = "decoder." + std::to_string(i + 1);
    T *= 2;
    std::visit(
        [&](const auto& layer) {
          using L = std::remove_cvref_t<decltype(layer)>;
          if constexpr (std::is_same_v<L, Conv1DParams>) {
            rows.push_back({base + ".conv", "upsample+conv1d+norm_relu", {T, layer.kernels.dim(0)}, count(layer)});
          } else {
            rows.push_back({base + ".bilstm", "upsample+bilstm", {T, 2 * cfg.hidden}, count(layer)});
          }
        },
        p.decoder[i]);
  }
  rows.push_back({"output", "time_softmax_dense", {reference_T, cfg.num_classes}, count(p.output)});
  return rows;
}

inline std::string format_description(const Model& m, std::size_t reference_T = 100) {
  std::ostringstream os;
  const auto& cfg = m.config();
  os << "variant=" << to_string(cfg.variant) << " K=" << cfg.depth << " conv_len=" << cfg.conv_len
     << " hidden=" << cfg.hidden << " input_dim=" << cfg.input_dim << " classes=" << cfg.num_classes << "\n";
  os << std::left << std::setw(20) << "layer" << std::setw(28) << "type" << std::setw(14) << "output"
     << "params\n";
  std::size_t total = 0;
  for (const auto& r : describe(m, reference_T)) {
    os << std::left << std::setw(20) << r.name << std::setw(28) << r.type << std::setw(14)
       << shape_str(r.output_shape) << r.parameters << "\n";
    total += r.parameters;
  }
  os << "total parameters: " << total << "\n";
  return os.str();
}

}  // namespace tricornet
