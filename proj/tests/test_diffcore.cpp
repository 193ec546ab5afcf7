// Copyright 2026 The sketchscene Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "sketchscene/diff/adam.hpp"
#include "sketchscene/diff/grad_check.hpp"
#include "sketchscene/diff/layers.hpp"
#include "sketchscene/diff/ops.hpp"
#include "gradient_suite.hpp"
#include "testing.hpp"

namespace sks::diff {
namespace {

using testing::random_values;
using D = double;

TEST(Ops, SoftmaxOfZerosIsUniform) {
  Tape<float> tape;
  auto s = softmax(tape.zeros({1, 3}));
  for (float v : s.value()) EXPECT_NEAR(v, 1.0f / 3.0f, 1e-7);
}

TEST(Ops, SoftmaxRowsSumToOne) {
  Rng rng(3);
  Tape<float> tape;
  auto x = tape.constant({6, 7}, random_values<float>(42, rng, -4, 4));
  auto s = softmax(x);
  for (int r = 0; r < 6; ++r) {
    double total = 0;
    for (int c = 0; c < 7; ++c) {
      EXPECT_GE(s.value()[r * 7 + c], 0.0f);
      total += s.value()[r * 7 + c];
    }
    EXPECT_NEAR(total, 1.0, 1e-6);
  }
}

TEST(Ops, L2DistanceToSelfIsZero) {
  Rng rng(5);
  Tape<float> tape;
  auto v = tape.constant({3, 4}, random_values<float>(12, rng));
  for (float d : l2_distance(v, v).value()) EXPECT_EQ(d, 0.0f);
}

TEST(Ops, MatmulOfOnes) {
  Tape<float> tape;
  auto c = matmul(tape.constant({2, 3}, std::vector<float>(6, 1.0f)), tape.constant({3, 2}, std::vector<float>(4 + 2, 1.0f)));
  ASSERT_EQ(c.shape(), (Shape{2, 2}));
  for (float v : c.value()) EXPECT_EQ(v, 3.0f);
}

TEST(Ops, ShapeMismatchNamesOpAndShapes) {
  Tape<float> tape;
  auto a = tape.zeros({2, 3});
  auto b = tape.zeros({2, 2});
  try {
    matmul(a, b);
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("matmul"), std::string::npos);
    EXPECT_NE(msg.find("[2,3]"), std::string::npos);
    EXPECT_NE(msg.find("[2,2]"), std::string::npos);
  }
  EXPECT_THROW(add(a, b), ShapeError);
  EXPECT_THROW(mul(a, b), ShapeError);
  EXPECT_THROW(l2_distance(a, b), ShapeError);
  EXPECT_THROW(concat<float>({a, tape.zeros({2, 2})}, 0), ShapeError);
}

TEST(Backward, DiamondAccumulatesBothPaths) {
  Tape<float> tape;
  auto x = tape.variable({1}, {3.0f});
  auto y = add(mul(x, x), mul(x, x));
  tape.backward(sum(y));
  EXPECT_FLOAT_EQ(x.grad()[0], 12.0f);
}

TEST(Backward, LeafWithoutParentsAccumulatesOnly) {
  Tape<float> tape;
  auto x = tape.variable({2}, {1.0f, 2.0f});
  tape.backward(sum(mul(x, x)));
  EXPECT_FLOAT_EQ(x.grad()[0], 2.0f);
  EXPECT_FLOAT_EQ(x.grad()[1], 4.0f);
  EXPECT_THROW(tape.backward(sum(x)), Error);
}

TEST(Backward, ParameterGradientFlushedOnce) {
  ParameterSet<float> params;
  auto& p = params.add("w", {2});
  p.value = {1.0f, -1.0f};
  Tape<float> tape;
  auto a = tape.param(p);
  auto b = tape.param(p);
  EXPECT_EQ(a.id(), b.id());
  tape.backward(sum(mul(a, b)));
  EXPECT_FLOAT_EQ(p.grad[0], 2.0f);
  EXPECT_FLOAT_EQ(p.grad[1], -2.0f);
}

TEST(Backward, FrozenParameterGetsNoGradient) {
  ParameterSet<float> params;
  auto& p = params.add("w", {1});
  p.value = {2.0f};
  Tape<float> tape;
  auto x = tape.variable({1}, {3.0f});
  tape.backward(sum(mul(x, tape.frozen(p))));
  EXPECT_EQ(p.grad[0], 0.0f);
  EXPECT_FLOAT_EQ(x.grad()[0], 2.0f);
}

TEST(Backward, BitIdenticalAcrossRuns) {
  auto run = [] {
    Rng rng(11);
    ParameterSet<float> params;
    Mlp<float> mlp(params, "m", {8, 16, 4}, Activation::kLeakyRelu, Activation::kSigmoid, rng);
    Tape<float> tape;
    auto x = tape.constant({5, 8}, random_values<float>(40, rng));
    auto y = mlp(tape, x);
    tape.backward(mean(y));
    std::vector<float> out(y.value().begin(), y.value().end());
    for (auto* p : params.all()) out.insert(out.end(), p->grad.begin(), p->grad.end());
    return out;
  };
  EXPECT_EQ(run(), run());
}

// ---------------------------------------------------------------- grad_check

TEST(GradCheck, SumOfSquares) {
  ScalarGraph<D> f = [](Tape<D>&, Var<D> x) { return sum(mul(x, x)); };
  auto r = grad_check(f, {2}, std::vector<D>{1.0, 2.0}, 1e-3);
  EXPECT_NEAR(r.analytic[0], 2.0, 1e-12);
  EXPECT_NEAR(r.analytic[1], 4.0, 1e-12);
  EXPECT_LT(r.max_relative_error, 1e-4);
}

TEST(GradCheck, SoftmaxCrossEntropyAtUniformLogits) {
  ScalarGraph<D> f = [](Tape<D>&, Var<D> x) { return sum(cross_entropy_logits(x, {0})); };
  auto r = grad_check(f, {1, 3}, std::vector<D>{0.0, 0.0, 0.0}, 1e-3);
  EXPECT_NEAR(r.analytic[0], -2.0 / 3.0, 1e-12);
  EXPECT_NEAR(r.analytic[1], 1.0 / 3.0, 1e-12);
  EXPECT_NEAR(r.analytic[2], 1.0 / 3.0, 1e-12);
  EXPECT_LT(r.max_relative_error, 1e-4);
}

TEST(GradCheck, ConstantFunction) {
  ScalarGraph<D> f = [](Tape<D>& t, Var<D>) { return t.constant({1}, {4.0}); };
  auto r = grad_check(f, {3}, std::vector<D>{1, 2, 3}, 1e-3);
  for (double g : r.analytic) EXPECT_EQ(g, 0.0);
  EXPECT_EQ(r.max_relative_error, 0.0);
}

TEST(GradCheck, NonFiniteReportsIndex) {
  ScalarGraph<D> f = [](Tape<D>& t, Var<D> x) {
    // Blows up only when component 1 moves away from 0.
    auto v = x.value();
    std::vector<D> c(v.size(), 1.0);
    if (v[1] != 0.0) c[1] = INFINITY;
    return sum(mul(x, t.constant(x.shape(), c)));
  };
  auto r = grad_check(f, {3}, std::vector<D>{1.0, 0.0, 2.0}, 1e-3);
  EXPECT_FALSE(r.finite);
  ASSERT_TRUE(r.non_finite_index.has_value());
  EXPECT_EQ(*r.non_finite_index, 1u);
  EXPECT_FALSE(r.passed(1e-4));
}

TEST(GradCheck, RejectsStepOutsideRange) {
  ScalarGraph<D> f = [](Tape<D>&, Var<D> x) { return sum(x); };
  EXPECT_THROW(grad_check(f, {1}, std::vector<D>{1.0}, 1e-6), Error);
  EXPECT_THROW(grad_check(f, {1}, std::vector<D>{1.0}, 0.1), Error);
}

// Every primitive, on 10 random small instances, wrapped in a random linear
// read-out so every output element matters.
using testing::PrimitiveCase;

class PrimitiveGradients : public ::testing::TestWithParam<PrimitiveCase> {};

TEST_P(PrimitiveGradients, TenRandomInstances) {
  const auto trials = testing::primitive_trials(GetParam());
  for (std::size_t i = 0; i < trials.size(); ++i)
    EXPECT_TRUE(trials[i].passed(testing::kGradTolerance))
        << GetParam().name << " trial " << i << " err " << trials[i].max_relative_error << " at " << trials[i].worst_index;
}

INSTANTIATE_TEST_SUITE_P(All, PrimitiveGradients, ::testing::ValuesIn(testing::primitive_cases()),
                         [](const ::testing::TestParamInfo<PrimitiveCase>& info) { return info.param.name; });

TEST(Attention, WeightRowsSumToOne) {
  Rng rng(8);
  Tape<float> tape;
  auto q = tape.constant({5, 16}, random_values<float>(80, rng, -2, 2));
  AttentionWeights<float> w;
  multi_head_attention(q, q, q, 4, {{0, 2}, {2, 3}}, 0.5f, &w);
  ASSERT_EQ(w.size(), 8u);
  for (std::size_t b = 0; b < w.size(); ++b) {
    const int len = b < 4 ? 2 : 3;
    for (int i = 0; i < len; ++i) {
      double s = 0;
      for (int j = 0; j < len; ++j) s += w[b][static_cast<std::size_t>(i * len + j)];
      EXPECT_NEAR(s, 1.0, 1e-6);
    }
  }
}

// ---------------------------------------------------------------- Adam

TEST(Adam, ZeroGradientLeavesParametersUnchanged) {
  ParameterSet<float> params;
  auto& p = params.add("w", {3});
  p.value = {0.5f, -1.0f, 2.0f};
  Adam<float> opt(params.all(), {});
  EXPECT_TRUE(opt.step());
  EXPECT_EQ(p.value, (std::vector<float>{0.5f, -1.0f, 2.0f}));
  EXPECT_EQ(opt.steps(), 1);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  ParameterSet<float> params;
  auto& p = params.add("w", {1});
  p.value = {1.0f};
  p.grad = {1.0f};
  AdamOptions o;
  o.learning_rate = 0.1;
  Adam<float> opt(params.all(), o);
  opt.step();
  EXPECT_NEAR(p.value[0], 0.9f, 1e-6);
  EXPECT_EQ(p.grad[0], 0.0f);
  EXPECT_EQ(opt.first_moment(0).size(), p.size());
  EXPECT_EQ(opt.second_moment(0).size(), p.size());
}

TEST(Adam, IdenticalParamsGetIdenticalUpdates) {
  ParameterSet<float> params;
  auto& a = params.add("a", {2});
  auto& b = params.add("b", {2});
  a.value = b.value = {0.3f, -0.2f};
  Adam<float> opt(params.all(), {});
  for (int i = 0; i < 5; ++i) {
    a.grad = b.grad = {0.1f * i, -0.5f};
    opt.step();
  }
  EXPECT_EQ(a.value, b.value);
}

TEST(Adam, NonFiniteGradientSkipsStepAndWarns) {
  ParameterSet<float> params;
  auto& p = params.add("w", {2});
  p.value = {1.0f, 1.0f};
  p.grad = {NAN, 1.0f};
  Adam<float> opt(params.all(), {});
  int warnings = 0;
  testing::ScopedWarningCapture capture([&](const std::string&) { ++warnings; });
  EXPECT_FALSE(opt.step());
  EXPECT_EQ(opt.steps(), 1);
  EXPECT_EQ(warnings, 1);
  EXPECT_EQ(p.value, (std::vector<float>{1.0f, 1.0f}));
  p.grad = {1.0f, 1.0f};
  EXPECT_TRUE(opt.step());
  EXPECT_EQ(opt.steps(), 2);
}

TEST(Adam, DefaultHyperparameters) {
  AdamOptions o;
  EXPECT_DOUBLE_EQ(o.learning_rate, 1e-4);
  EXPECT_DOUBLE_EQ(o.beta1, 0.5);
  EXPECT_DOUBLE_EQ(o.beta2, 0.999);
  EXPECT_DOUBLE_EQ(o.epsilon, 1e-9);
}

TEST(Parameters, DuplicateNameRejected) {
  ParameterSet<float> params;
  params.add("x", {1});
  EXPECT_THROW(params.add("x", {1}), Error);
}

}  // namespace
}  // namespace sks::diff
