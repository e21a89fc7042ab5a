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

#include <set>

#include "tricornet/model.hpp"

namespace tricornet {
namespace {

ModelConfig default_size_config(Variant v) {
  ModelConfig c;
  c.variant = v;
  c.depth = 2;
  c.conv_len = 30;
  c.hidden = 64;
  c.input_dim = 128;
  c.num_classes = 17;
  c.seed = 3;
  return c;
}

ModelConfig small_config(Variant v, std::size_t K = 2) {
  ModelConfig c;
  c.variant = v;
  c.depth = K;
  c.conv_len = 3;
  c.hidden = 4;
  c.input_dim = 3;
  c.num_classes = 5;
  c.seed = 1;
  return c;
}

Tensor noise(std::size_t T, std::size_t d, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  Tensor x({T, d});
  for (auto& v : x.data()) v = n(rng);
  return x;
}

std::vector<std::string> names(const Model& m) {
  std::vector<std::string> out;
  for (const auto& [n, t] : m.named_parameters()) out.push_back(n);
  return out;
}

void expect_distributions(const Tensor& y) {
  for (std::size_t r = 0; r < y.rows(); ++r) {
    double s = 0.0;
    for (std::size_t k = 0; k < y.cols(); ++k) {
      EXPECT_GE(y(r, k), 0.0);
      s += y(r, k);
    }
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
}

TEST(Build, EncoderFilterCounts) {
  const Model m = build(default_size_config(Variant::kFull));
  ASSERT_EQ(m.params().encoder.size(), 2u);
  EXPECT_EQ(m.params().encoder[0].kernels.shape(), (Shape{64, 128, 30}));
  EXPECT_EQ(m.params().encoder[1].kernels.shape(), (Shape{96, 64, 30}));
  EXPECT_EQ(ModelConfig::filters(3), 128u);
}

TEST(Build, DecoderWidthFollowsVariant) {
  const auto last_width = [](Variant v) {
    const auto rows = describe(build(default_size_config(v)));
    return rows[rows.size() - 2].output_shape[1];
  };
  EXPECT_EQ(last_width(Variant::kFull), 128u);
  EXPECT_EQ(last_width(Variant::kLow), 128u);
  EXPECT_EQ(last_width(Variant::kHigh), 64u);
  EXPECT_EQ(last_width(Variant::kConvOnly), 64u);
}

TEST(Build, HighAndConvOnlyDifferOnlyInMiddleBlock) {
  const auto high = names(build(small_config(Variant::kHigh)));
  const auto conv = names(build(small_config(Variant::kConvOnly)));
  std::vector<std::string> high_without_middle;
  for (const auto& n : high) {
    if (n.rfind("middle.bilstm.", 0) != 0) high_without_middle.push_back(n);
  }
  EXPECT_EQ(high_without_middle, conv);
  EXPECT_GT(high.size(), conv.size());
}

TEST(Build, EncodersAreSharedAcrossVariants) {
  for (Variant v : {Variant::kHigh, Variant::kLow, Variant::kConvOnly}) {
    const auto n = names(build(small_config(v)));
    const auto full = names(build(small_config(Variant::kFull)));
    EXPECT_EQ(std::vector<std::string>(n.begin(), n.begin() + 4), std::vector<std::string>(full.begin(), full.begin() + 4));
  }
}

TEST(Build, LayerKindsPerVariant) {
  const auto kinds = [](Variant v) {
    const Model m = build(small_config(v, 3));
    std::string s = m.params().middle ? "M" : "-";
    for (const auto& layer : m.params().decoder) s += std::holds_alternative<BiLSTMParams>(layer) ? 'R' : 'C';
    return s;
  };
  EXPECT_EQ(kinds(Variant::kFull), "-RRR");
  EXPECT_EQ(kinds(Variant::kHigh), "MCCC");
  EXPECT_EQ(kinds(Variant::kLow), "-CCR");
  EXPECT_EQ(kinds(Variant::kConvOnly), "-CCC");
}

TEST(Build, ForgetBiasStartsAtOne) {
  const Model m = build(small_config(Variant::kFull));
  for (const auto& [n, t] : m.named_parameters()) {
    if (n.ends_with(".b_f")) {
      EXPECT_EQ(*t, Tensor({4}, 1.0)) << n;
    } else if (n.find(".b_") != std::string::npos || n.ends_with(".bias")) {
      EXPECT_EQ(*t, Tensor(t->shape())) << n;
    }
  }
}

TEST(Build, InvalidConfigRejected) {
  ModelConfig c = small_config(Variant::kFull);
  c.depth = 0;
  EXPECT_THROW(build(c), ConfigError);
  c = small_config(Variant::kFull);
  c.num_classes = 1;
  EXPECT_THROW(build(c), ConfigError);
  c = small_config(Variant::kFull);
  c.dropout_conv = 1.0;
  EXPECT_THROW(build(c), ConfigError);
}

TEST(Forward, InternalLengthsAndOutputShape) {
  const Model m = build(default_size_config(Variant::kFull));
  std::vector<std::size_t> lengths;
  for (const auto& r : describe(m, 100)) {
    if (r.name.ends_with(".pool") || r.name.starts_with("decoder.")) lengths.push_back(r.output_shape[0]);
  }
  EXPECT_EQ(lengths, (std::vector<std::size_t>{50, 25, 50, 100}));
  const Tensor y = forward(m, noise(100, 128, 4));
  EXPECT_EQ(y.shape(), (Shape{100, 17}));
  expect_distributions(y);
}

TEST(Forward, OddLengthPaddedAndTrimmed) {
  const Model m = build(default_size_config(Variant::kFull));
  EXPECT_EQ(forward(m, noise(99, 128, 5)).shape(), (Shape{99, 17}));
  const auto rows = describe(m, 99);
  EXPECT_EQ(rows[1].name, "pad");
  EXPECT_EQ(rows[1].output_shape, (Shape{100, 128}));
}

TEST(Forward, ShortSequencesEveryVariant) {
  for (Variant v : {Variant::kFull, Variant::kHigh, Variant::kLow, Variant::kConvOnly}) {
    const Model m = build(small_config(v));
    for (std::size_t T : {1u, 2u, 3u, 5u, 99u, 100u}) {
      const Tensor y = forward(m, noise(T, 3, T));
      EXPECT_EQ(y.shape(), (Shape{T, 5})) << to_string(v) << " T=" << T;
      expect_distributions(y);
    }
  }
}

TEST(Forward, ZeroInputGivesDistributions) {
  expect_distributions(forward(build(small_config(Variant::kLow)), Tensor({12, 3})));
}

TEST(Forward, WidthMismatchThrows) {
  EXPECT_THROW(forward(build(small_config(Variant::kFull)), Tensor({8, 4})), ShapeError);
}

TEST(Forward, InferenceIsDeterministic) {
  const Model m = build(small_config(Variant::kFull));
  const Tensor x = noise(10, 3, 6);
  EXPECT_EQ(forward(m, x), forward(m, x));
}

TEST(Forward, TrainingModeAppliesDropout) {
  ModelConfig c = small_config(Variant::kConvOnly);
  c.dropout_conv = 0.5;
  const Model m = build(c);
  const Tensor x = noise(16, 3, 7);
  Tape tape;
  Rng rng(1);
  const NetworkVars p = bind(tape, m, false);
  const Tensor train_out = forward(m, p, tape.constant(x), true, rng).value();
  EXPECT_NE(train_out, forward(m, x));
}

TEST(Describe, ConvParameterArithmetic) {
  const auto rows = describe(build(default_size_config(Variant::kFull)));
  EXPECT_EQ(rows[1].name, "encoder.1.conv");
  EXPECT_EQ(rows[1].parameters, 64u * (128u * 30u) + 64u);
  EXPECT_EQ(rows[1].parameters, 245824u);
}

TEST(Describe, TotalsMatchAndBuildsAreDeterministic) {
  const Model a = build(default_size_config(Variant::kLow)), b = build(default_size_config(Variant::kLow));
  std::size_t total = 0;
  for (const auto& r : describe(a)) total += r.parameters;
  EXPECT_EQ(total, a.parameter_count());
  EXPECT_EQ(a.parameter_count(), b.parameter_count());
  const auto pa = a.named_parameters(), pb = b.named_parameters();
  for (std::size_t i = 0; i < pa.size(); ++i) EXPECT_EQ(*pa[i].second, *pb[i].second) << pa[i].first;
}

TEST(Describe, HighListsOneBilstm) {
  int bilstms = 0;
  for (const auto& r : describe(build(small_config(Variant::kHigh)))) bilstms += r.type.find("bilstm") != std::string::npos;
  EXPECT_EQ(bilstms, 1);
}

TEST(Describe, SeedChangesWeights) {
  ModelConfig c = small_config(Variant::kFull);
  const Model a = build(c);
  c.seed = 2;
  EXPECT_NE(*a.named_parameters()[0].second, *build(c).named_parameters()[0].second);
}

}  // namespace
}  // namespace tricornet
