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

#include "sketchscene/diff/grad_check.hpp"
#include "sketchscene/olr/encoder.hpp"
#include "testing.hpp"

namespace sks::olr {
namespace {

using diff::Tape;
using diff::Var;
using testing::random_values;
using D = double;

// Rows a, p, n at distances |a-p| = dp and |a-n| = dn along one axis.
struct Triple {
  std::vector<float> a, p, n;
};
Triple at_distances(float dp, float dn) {
  Triple t{std::vector<float>(kEmbedDim, 0), std::vector<float>(kEmbedDim, 0), std::vector<float>(kEmbedDim, 0)};
  t.p[0] = dp;
  t.n[1] = dn;
  return t;
}

float triplet_value(const Triple& t, float m = 0.5f) {
  Tape<float> tape;
  auto c = [&](const std::vector<float>& v) { return tape.constant({1, kEmbedDim}, v); };
  return triplet_loss(c(t.a), c(t.p), c(t.n), m).item();
}

TEST(Triplet, MarginSatisfiedGivesZero) { EXPECT_FLOAT_EQ(triplet_value(at_distances(0, 1)), 0.0f); }

TEST(Triplet, FormulaOracle) {
  EXPECT_NEAR(triplet_from_distances(0.6, 0.2, 0.5), 0.9, 1e-12);
  EXPECT_NEAR(triplet_value(at_distances(0.6f, 0.2f)), 0.9, 1e-6);
}

TEST(Triplet, EqualPositiveAndNegativeGivesMargin) {
  Tape<float> tape;
  auto a = tape.constant({1, 3}, {0.1f, 0.2f, 0.3f});
  auto p = tape.constant({1, 3}, {1.0f, -1.0f, 0.5f});
  EXPECT_NEAR(triplet_loss(a, p, p).item(), 0.5, 1e-6);
}

TEST(Triplet, NonNegativeAndZeroExactlyWhenMarginMet) {
  Rng rng(3);
  for (int i = 0; i < 200; ++i) {
    const double dp = rng.uniform(0, 2), dn = rng.uniform(0, 2);
    const double l = triplet_from_distances(dp, dn);
    EXPECT_GE(l, 0.0);
    EXPECT_EQ(l == 0.0, dn >= dp + 0.5);
  }
}

TEST(Triplet, SwappingPositiveAndNegativeNeverDecreasesZeroLoss) {
  Rng rng(4);
  for (int i = 0; i < 200; ++i) {
    const double dp = rng.uniform(0, 1), dn = rng.uniform(0, 3);
    if (triplet_from_distances(dp, dn) != 0.0) continue;
    EXPECT_GT(triplet_from_distances(dn, dp), 0.0);
  }
}

// d L / d a of the triplet loss (mean over rows) on 10 random instances.
TEST(Triplet, GradientMatchesFiniteDifferences) {
  for (int trial = 0; trial < 10; ++trial) {
    Rng rng(20 + trial);
    const int rows = 1 + rng.below(4), cols = 2 + rng.below(6);
    const auto p = random_values<D>(static_cast<std::size_t>(rows * cols), rng);
    const auto n = random_values<D>(static_cast<std::size_t>(rows * cols), rng);
    const auto a = random_values<D>(static_cast<std::size_t>(rows * cols), rng);
    diff::ScalarGraph<D> f = [&](Tape<D>& t, Var<D> x) {
      return triplet_loss(x, t.constant({rows, cols}, p), t.constant({rows, cols}, n), D(0.5));
    };
    auto r = diff::grad_check(f, {rows, cols}, a, 1e-4);
    EXPECT_TRUE(r.passed(1e-4)) << "trial " << trial << " err " << r.max_relative_error;
  }
}

TEST(Cce, UniformLogitsGiveLogC) {
  Tape<float> tape;
  auto logits = tape.constant({1, 8}, std::vector<float>(8, 0.0f));
  EXPECT_NEAR(diff::mean(diff::cross_entropy_logits(logits, {3})).item(), std::log(8.0), 1e-6);
}

class EncoderTest : public ::testing::Test {
 protected:
  EncoderTest() : rng_(5), enc_(params_, 8, rng_) {}

  glyph::ObjectInstance object(glyph::Domain d, int cls, std::uint64_t seed) {
    Rng r(seed);
    glyph::ObjectInstance o;
    o.class_id = cls;
    o.domain = d;
    o.raster = random_values<float>(glyph::kCropPixels, r, 0, 1);
    o.mask.assign(glyph::kCropPixels, 1.0f);
    o.bbox = {0.1f, 0.1f, 0.5f, 0.5f};
    return o;
  }

  Rng rng_;
  diff::ParameterSet<float> params_;
  ObjectEncoder<float> enc_;
};

TEST_F(EncoderTest, OutputIs128DAndDeterministic) {
  const auto o = object(glyph::Domain::kSketch, 1, 7);
  Tape<float> t1, t2;
  auto e1 = enc_.encode(t1, {&o});
  auto e2 = enc_.encode(t2, {&o});
  ASSERT_EQ(e1.shape(), (diff::Shape{1, kEmbedDim}));
  EXPECT_TRUE(std::equal(e1.value().begin(), e1.value().end(), e2.value().begin()));
}

TEST_F(EncoderTest, BranchesShareNoWeights) {
  for (const auto& name : params_.names()) {
    if (name.rfind("olr.fs", 0) == 0) {
      EXPECT_EQ(params_.find("olr.fi" + name.substr(6)) != nullptr, true) << name;
      EXPECT_NE(params_.find(name), params_.find("olr.fi" + name.substr(6)));
    }
  }
  EXPECT_FALSE(params_.with_prefix({"olr.fs"}).empty());
  EXPECT_FALSE(params_.with_prefix({"olr.head"}).empty());
  EXPECT_EQ(params_.at("olr.fe.w").shape, (diff::Shape{kEmbedDim, 8}));
}

TEST_F(EncoderTest, PerturbingSketchBranchLeavesPhotoEmbeddingsBitIdentical) {
  const auto photo = object(glyph::Domain::kPhoto, 2, 8);
  const auto sketch = object(glyph::Domain::kSketch, 2, 9);
  Tape<float> t1;
  auto before = enc_.encode(t1, {&photo, &sketch});
  std::vector<float> p0(before.value().begin(), before.value().begin() + kEmbedDim);
  std::vector<float> s0(before.value().begin() + kEmbedDim, before.value().end());
  for (auto* p : params_.with_prefix({"olr.fs"}))
    for (auto& v : p->value) v += 0.05f;
  Tape<float> t2;
  auto after = enc_.encode(t2, {&photo, &sketch});
  EXPECT_TRUE(std::equal(p0.begin(), p0.end(), after.value().begin()));
  EXPECT_FALSE(std::equal(s0.begin(), s0.end(), after.value().begin() + kEmbedDim));
}

TEST_F(EncoderTest, MixedBatchMatchesSeparateEncoding) {
  const auto a = object(glyph::Domain::kPhoto, 0, 10), b = object(glyph::Domain::kSketch, 1, 11),
             c = object(glyph::Domain::kPhoto, 2, 12);
  Tape<float> t;
  auto mixed = enc_.encode(t, {&a, &b, &c});
  for (int i = 0; i < 3; ++i) {
    const glyph::ObjectInstance* o = i == 0 ? &a : i == 1 ? &b : &c;
    Tape<float> ts;
    auto single = enc_.encode(ts, {o});
    for (int k = 0; k < kEmbedDim; ++k)
      EXPECT_NEAR(mixed.value()[static_cast<std::size_t>(i * kEmbedDim + k)], single.value()[static_cast<std::size_t>(k)], 1e-5);
  }
}

TEST_F(EncoderTest, WrongRasterShapeRejected) {
  auto o = object(glyph::Domain::kPhoto, 0, 13);
  o.raster.resize(100);
  Tape<float> t;
  EXPECT_THROW(enc_.encode(t, {&o}), diff::ShapeError);
}

TEST_F(EncoderTest, CceRejectsLabelOutOfRange) {
  const auto o = object(glyph::Domain::kPhoto, 0, 14);
  Tape<float> t;
  auto e = enc_.encode(t, {&o});
  EXPECT_THROW(cce_loss(t, enc_, e, e, e, {8}, {0}, {0}), Error);
}

TEST_F(EncoderTest, CceOfIdenticalInputsIsThreeTimesOneTerm) {
  const auto o = object(glyph::Domain::kPhoto, 3, 15);
  Tape<float> t;
  auto e = enc_.encode(t, {&o});
  const float single = diff::mean(diff::cross_entropy_logits(enc_.classify(t, e), {3})).item();
  EXPECT_NEAR(cce_loss(t, enc_, e, e, e, {3}, {3}, {3}).item(), 3 * single, 1e-5);
}

TEST_F(EncoderTest, CceConfidentCorrectLogitsApproachZero) {
  Tape<float> t;
  std::vector<float> logits(8, 0.0f);
  logits[2] = 50.0f;
  EXPECT_LT(diff::mean(diff::cross_entropy_logits(t.constant({1, 8}, logits), {2})).item(), 1e-6);
}

// L_cce gradient with respect to the classifier weights, in double.
TEST(Cce, GradientMatchesFiniteDifferences) {
  for (int trial = 0; trial < 10; ++trial) {
    Rng rng(40 + trial);
    diff::ParameterSet<D> params;
    ObjectEncoder<D> enc(params, 8, rng);
    const int rows = 1 + rng.below(3);
    std::vector<int> la, lp, ln;
    for (int r = 0; r < rows; ++r) {
      la.push_back(rng.below(8));
      lp.push_back(la.back());
      ln.push_back(rng.below(8));
    }
    const auto xa = random_values<D>(static_cast<std::size_t>(rows * kEmbedDim), rng);
    const auto xp = random_values<D>(static_cast<std::size_t>(rows * kEmbedDim), rng);
    const auto xn = random_values<D>(static_cast<std::size_t>(rows * kEmbedDim), rng);
    diff::ScalarGraph<D> f = [&](Tape<D>& t, Var<D> a) {
      return cce_loss(t, enc, a, t.constant({rows, kEmbedDim}, xp), t.constant({rows, kEmbedDim}, xn), la, lp, ln, true);
    };
    auto r = diff::grad_check(f, {rows, kEmbedDim}, xa, 1e-4);
    EXPECT_TRUE(r.passed(1e-4)) << "trial " << trial << " err " << r.max_relative_error;
  }
}

}  // namespace
}  // namespace sks::olr
