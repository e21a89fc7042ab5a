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

#include <cmath>
#include <random>

#include "tricornet/autodiff.hpp"

namespace tricornet {
namespace {

Tensor uniform(Shape shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor t(std::move(shape));
  for (auto& v : t.data()) v = u(rng);
  return t;
}

TEST(Backward, SumGivesOnes) {
  Tape tape;
  Var x = tape.leaf(uniform({3, 4}, 1));
  const auto g = tape.backward(sum(x));
  EXPECT_EQ(g.at(x.id()), Tensor::ones({3, 4}));
}

TEST(Backward, SquareGivesTwiceInput) {
  Tape tape;
  Var x = tape.leaf(Tensor::vector({1, 2}));
  const auto g = tape.backward(sum(mul(x, x)));
  EXPECT_EQ(g.at(x.id()), Tensor::vector({2, 4}));
}

TEST(Backward, FanOutAccumulates) {
  Tape tape;
  Var y = tape.leaf(uniform({2, 3}, 2));
  const auto g = tape.backward(add(sum(y), sum(y)));
  EXPECT_EQ(g.at(y.id()), Tensor({2, 3}, 2.0));
}

TEST(Backward, LossGradientIsOne) {
  Tape tape;
  Var x = tape.leaf(Tensor::vector({1, 2}));
  Var loss = sum(mul(x, x));
  tape.backward(loss, Retain::kYes);
  EXPECT_EQ(loss.grad().item(), 1.0);
  EXPECT_EQ(x.grad().shape(), x.value().shape());
}

TEST(Backward, NonScalarLossIsContractError) {
  Tape tape;
  Var x = tape.leaf(Tensor::vector({1, 2}));
  EXPECT_THROW(tape.backward(mul(x, x)), ContractError);
}

TEST(Backward, DisconnectedLeafGetsZeroGrad) {
  Tape tape;
  Var x = tape.leaf(Tensor::vector({1, 2}));
  Var unused = tape.leaf(Tensor::vector({3, 4, 5}));
  const auto g = tape.backward(sum(x));
  EXPECT_EQ(g.at(unused.id()), Tensor::zeros({3}));
}

TEST(Backward, ConstantsReceiveNoGradient) {
  Tape tape;
  Var x = tape.leaf(Tensor::vector({1, 2}));
  Var c = tape.constant(Tensor::vector({3, 4}));
  const auto g = tape.backward(sum(mul(x, c)));
  EXPECT_EQ(g.at(x.id()), Tensor::vector({3, 4}));
  EXPECT_EQ(g.count(c.id()), 0u);
}

TEST(Backward, RepeatedRunsAreBitIdentical) {
  const Tensor a = uniform({4, 5}, 3), b = uniform({5, 2}, 4);
  const auto run = [&] {
    Tape tape;
    Var va = tape.leaf(a), vb = tape.leaf(b);
    Var loss = sum(tanh(matmul(va, vb)));
    auto g = tape.backward(loss);
    return std::make_pair(g.at(va.id()), g.at(vb.id()));
  };
  EXPECT_EQ(run(), run());
}

TEST(FiniteDiff, LinearFunctionIsExact) {
  const ScalarFunction f = [](Tape&, Var x) { return sum(x); };
  EXPECT_LE(finite_diff_check(f, uniform({3, 3}, 5), 1e-5), 1e-10);
}

TEST(FiniteDiff, CubeWithinSecondOrderError) {
  const ScalarFunction f = [](Tape&, Var x) { return sum(mul(mul(x, x), x)); };
  EXPECT_LE(finite_diff_check(f, uniform({10}, 6), 1e-5), 1e-6);
}

TEST(FiniteDiff, NonScalarFunctionIsContractError) {
  const ScalarFunction f = [](Tape&, Var x) { return mul(x, x); };
  EXPECT_THROW(finite_diff_check(f, uniform({3}, 7), 1e-5), ContractError);
}

TEST(FiniteDiff, DetectsAWrongGradient) {
  // scale(x, 2) read back through a mul_const by 3 has gradient 6; pretend it is 3.
  const ScalarFunction f = [](Tape& tape, Var x) {
    Var y = scale(x, 2.0);
    Var z = tape.record(y.value(), {y.id()}, [yid = y.id()](Tape& t, NodeId self) {
      auto gy = t.grad_ref(yid).data();
      const auto g = t.grad(self).data();
      for (std::size_t i = 0; i < gy.size(); ++i) gy[i] += 0.5 * g[i];
    });
    return sum(z);
  };
  EXPECT_GT(finite_diff_check(f, uniform({4}, 8), 1e-5), 0.1);
}

// Each primitive against central differences on a small random input.
struct OpCase {
  const char* name;
  ScalarFunction f;
  Shape shape;
};

class PrimitiveGradient : public ::testing::TestWithParam<int> {};

std::vector<OpCase> op_cases() {
  const Tensor w = uniform({4, 3}, 20);
  const Tensor bias = uniform({3}, 21);
  const Tensor other = uniform({5, 3}, 22);
  return {
      {"matmul", [w](Tape& t, Var x) { return sum(tanh(matmul(x, t.constant(w)))); }, {5, 4}},
      {"matmul_tt", [w](Tape& t, Var x) { return sum(tanh(matmul(t.constant(w), x, Transpose::kYes, Transpose::kYes))); }, {5, 4}},
      {"transpose", [w](Tape& t, Var x) { return sum(mul(transpose(x), t.constant(w))); }, {3, 4}},
      {"add_bias", [bias](Tape& t, Var x) { return sum(tanh(add(x, t.constant(bias)))); }, {5, 3}},
      {"bias_grad", [other](Tape& t, Var b) { return sum(tanh(add(t.constant(other), b))); }, {3}},
      {"sub_mul", [other](Tape& t, Var x) { return sum(mul(sub(x, t.constant(other)), x)); }, {5, 3}},
      {"sigmoid", [](Tape&, Var x) { return sum(mul(sigmoid(x), x)); }, {4, 3}},
      {"tanh", [](Tape&, Var x) { return sum(mul(tanh(x), x)); }, {4, 3}},
      {"log", [](Tape&, Var x) { return sum(log(add_scalar(mul(x, x), 1.0))); }, {4, 3}},
      {"mean", [](Tape&, Var x) { return mean(mul(x, x)); }, {4, 3}},
      {"max_all", [](Tape&, Var x) { return max_all(x); }, {4, 3}},
      {"reduce_sum", [](Tape&, Var x) { return sum(tanh(reduce(x, 0, ReduceOp::kSum))); }, {4, 3}},
      {"reduce_mean", [](Tape&, Var x) { return sum(tanh(reduce(x, 1, ReduceOp::kMean))); }, {4, 3}},
      {"reduce_max", [](Tape&, Var x) { return sum(reduce(x, 1, ReduceOp::kMax)); }, {4, 3}},
      {"concat_slice", [](Tape&, Var x) { return sum(mul(slice(concat(x, x, 1), 1, 2, 5), slice(x, 1, 0, 3))); }, {4, 3}},
      {"div_scalar", [](Tape&, Var x) { return sum(div_scalar(x, add_scalar(sum(mul(x, x)), 1.0))); }, {4, 3}},
      {"stack_rows", [](Tape&, Var x) { return sum(tanh(stack_rows({slice(x, 0, 2, 3), slice(x, 0, 0, 1)}))); }, {4, 3}},
  };
}

TEST_P(PrimitiveGradient, MatchesCentralDifferences) {
  const auto cases = op_cases();
  const auto& c = cases.at(static_cast<std::size_t>(GetParam()));
  const Tensor x = uniform(c.shape, 100 + static_cast<std::uint64_t>(GetParam()));
  EXPECT_LE(finite_diff_check(c.f, x, 1e-6), 1e-6) << c.name;
}

INSTANTIATE_TEST_SUITE_P(Ops, PrimitiveGradient, ::testing::Range(0, static_cast<int>(op_cases().size())),
                         [](const auto& info) { return std::string(op_cases().at(info.param).name); });

}  // namespace
}  // namespace tricornet
