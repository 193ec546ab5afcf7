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

#include <algorithm>
#include <cmath>
#include <set>

#include "sketchscene/diff/adam.hpp"
#include "sketchscene/diff/grad_check.hpp"
#include "sketchscene/layout/compose.hpp"
#include "sketchscene/layout/generators.hpp"
#include "testing.hpp"

namespace sks::layout {
namespace {

using diff::Tape;
using diff::Var;
using glyph::BBox;
using testing::random_values;
using D = double;

BBox random_box(Rng& rng) {
  const float w = static_cast<float>(rng.uniform(0.05, 0.6)), h = static_cast<float>(rng.uniform(0.05, 0.6));
  const float x = static_cast<float>(rng.uniform(0, 1 - w)), y = static_cast<float>(rng.uniform(0, 1 - h));
  return {x, y, x + w, y + h};
}

// ---- GIoU ----

TEST(Giou, Oracles) {
  EXPECT_NEAR(giou({0, 0, 1, 1}, {0, 0, 1, 1}), 1.0, 1e-12);
  EXPECT_NEAR(giou({0, 0, 1, 1}, {2, 0, 3, 1}), -1.0 / 3.0, 1e-6);
  EXPECT_NEAR(giou({0, 0, 2, 2}, {1, 1, 3, 3}), -5.0 / 63.0, 1e-6);
}

TEST(Giou, SymmetricBoundedAndEqualToIouWhenHullIsUnion) {
  Rng rng(1);
  for (int k = 0; k < 1000; ++k) {
    const BBox a = random_box(rng), b = random_box(rng);
    const double g = giou(a, b);
    EXPECT_DOUBLE_EQ(g, giou(b, a));
    EXPECT_GE(g, -1.0);
    EXPECT_LE(g, 1.0);
  }
  // Nested boxes: hull = union = the outer box.
  EXPECT_NEAR(giou({0, 0, 1, 1}, {0.25f, 0.25f, 0.75f, 0.75f}), 0.25, 1e-6);
}

TEST(Giou, RowOpMatchesScalar) {
  Rng rng(2);
  std::vector<BBox> a, b;
  for (int k = 0; k < 6; ++k) {
    a.push_back(random_box(rng));
    b.push_back(random_box(rng));
  }
  Tape<float> t;
  auto g = giou_rows(t.constant({6, 4}, box_rows(a)), t.constant({6, 4}, box_rows(b)));
  for (int k = 0; k < 6; ++k) EXPECT_NEAR(g.value()[k], giou(a[k], b[k]), 1e-5);
}

std::vector<D> random_corner_rows(int n, Rng& rng) {
  std::vector<D> v;
  for (int k = 0; k < n; ++k) {
    const BBox b = random_box(rng);
    v.insert(v.end(), {b.x0, b.y0, b.x1, b.y1});
  }
  return v;
}

TEST(Giou, GradientMatchesFiniteDifferences) {
  for (int trial = 0; trial < 10; ++trial) {
    Rng rng(100 + trial);
    const int n = 1 + rng.below(4);
    const auto a = random_corner_rows(n, rng), b = random_corner_rows(n, rng);
    diff::ScalarGraph<D> f = [&](Tape<D>& t, Var<D> x) { return diff::sum(giou_rows(x, t.constant({n, 4}, b))); };
    auto r = diff::grad_check(f, {n, 4}, a, 1e-4);
    EXPECT_TRUE(r.passed(1e-4)) << "trial " << trial << " err " << r.max_relative_error;
  }
}

// ---- box generator and loss ----

// Draws FCR rows whose first-layer pre-activations under `layer` all sit at
// least 1e-3 from the ReLU kink, so central differences see a smooth function.
std::vector<D> smooth_fcr(int n, const diff::ParameterSet<D>& params, const std::string& layer, Rng& rng) {
  const auto* w = params.find(layer + ".w");
  const auto* b = params.find(layer + ".b");
  for (;;) {
    auto x = random_values<D>(static_cast<std::size_t>(n) * kFcrDim, rng);
    Tape<D> t;
    auto pre = diff::linear(t.constant({n, kFcrDim}, x), t.frozen(*w), t.frozen(*b));
    if (std::all_of(pre.value().begin(), pre.value().end(), [](D v) { return std::abs(v) > 1e-3; })) return x;
  }
}

TEST(BoxGenerator, CornersAlwaysWellOrdered) {
  Rng rng(3);
  diff::ParameterSet<float> params;
  BoxGenerator<float> gb(params, rng);
  Tape<float> t;
  auto out = gb(t, t.constant({64, kFcrDim}, random_values<float>(64 * kFcrDim, rng, -20, 20)));
  for (int r = 0; r < 64; ++r) {
    const float* b = out.value().data() + 4 * r;
    EXPECT_LT(b[0], b[2]);
    EXPECT_LT(b[1], b[3]);
  }
  EXPECT_EQ(params.at("gen.box.l0.w").shape, (diff::Shape{kFcrDim, 64}));
  EXPECT_EQ(params.at("gen.box.l1.w").shape, (diff::Shape{64, 4}));
}

TEST(BoxLoss, PerfectPredictionIsZero) {
  Rng rng(4);
  std::vector<BBox> boxes = {random_box(rng), random_box(rng)};
  Tape<float> t;
  auto b = t.constant({2, 4}, box_rows(boxes));
  EXPECT_NEAR(box_loss(b, b).item(), 0.0, 1e-6);
}

TEST(BoxLoss, DefaultWeightsAreTen) {
  const LossWeights w;
  EXPECT_EQ(w.box_giou, 10.0);
  EXPECT_EQ(w.box_l2, 10.0);
  EXPECT_EQ(w.mask_recon, 10.0);
  EXPECT_EQ(w.mask_adv, 0.25);
  EXPECT_EQ(w.mask_fm, 10.0);
}

TEST(BoxLoss, CountMismatchRejected) {
  Tape<float> t;
  EXPECT_THROW(box_loss(t.zeros({2, 4}), t.zeros({3, 4})), diff::ShapeError);
}

TEST(BoxLoss, GradientWrtFcrMatchesFiniteDifferences) {
  for (int trial = 0; trial < 10; ++trial) {
    Rng rng(200 + trial);
    diff::ParameterSet<D> params;
    BoxGenerator<D> gb(params, rng);
    const int n = 1 + rng.below(3);
    const auto truth = random_corner_rows(n, rng);
    const auto x = smooth_fcr(n, params, "gen.box.l0", rng);
    diff::ScalarGraph<D> f = [&](Tape<D>& t, Var<D> fcr) { return box_loss(gb(t, fcr), t.constant({n, 4}, truth)); };
    auto r = diff::grad_check(f, {n, kFcrDim}, x, 1e-4);
    EXPECT_TRUE(r.passed(1e-4)) << "trial " << trial << " err " << r.max_relative_error;
  }
}

// ---- mask GAN ----

class MaskGanTest : public ::testing::Test {
 protected:
  MaskGanTest() : rng_(5), gm_(params_, rng_), disc_(params_, 8, rng_) {}
  Rng rng_;
  diff::ParameterSet<float> params_;
  MaskGenerator<float> gm_;
  MaskDiscriminator<float> disc_;
};

TEST_F(MaskGanTest, ShapesAndRange) {
  Tape<float> t;
  auto m = gm_(t, t.constant({3, kFcrDim}, random_values<float>(3 * kFcrDim, rng_)));
  ASSERT_EQ(m.shape(), (diff::Shape{3, glyph::kCropPixels}));
  for (float v : m.value()) {
    EXPECT_GE(v, 0.0f);
    EXPECT_LE(v, 1.0f);
  }
  auto d = disc_(t, m, {0, 1, 2}, false);
  EXPECT_EQ(d.score.shape(), (diff::Shape{3}));
  ASSERT_EQ(d.hidden.size(), 2u);
  EXPECT_EQ(d.hidden[0].cols(), 256);
  EXPECT_EQ(d.hidden[1].cols(), 64);
  EXPECT_EQ(params_.at("disc.l0.w").shape, (diff::Shape{glyph::kCropPixels + 8, 256}));
}

TEST_F(MaskGanTest, PerfectGeneratorLeavesOnlyAdversarialTerm) {
  Tape<float> t;
  auto m = t.constant({2, glyph::kCropPixels}, random_values<float>(2 * glyph::kCropPixels, rng_, 0, 1));
  const std::vector<int> y = {1, 4};
  const float total = mask_generator_loss(t, disc_, m, m, y).item();
  auto s = disc_(t, m, y, true).score;
  double adv = 0;
  for (float v : s.value()) adv += (v - 1.0) * (v - 1.0);
  adv /= 2;
  EXPECT_NEAR(total, 0.25 * adv, 1e-5);
}

TEST(Lsgan, OptimumAtOneAndZeroIsZero) {
  Tape<float> t;
  EXPECT_NEAR(lsgan_discriminator_loss(t.constant({3}, {1, 1, 1}), t.constant({3}, {0, 0, 0})).item(), 0.0, 1e-6);
  EXPECT_NEAR(lsgan_discriminator_loss(t.constant({1}, {0}), t.constant({1}, {1})).item(), 1.0, 1e-6);
}

TEST(FeatureMatching, IdenticalActivationsGiveZero) {
  Tape<float> t;
  Rng rng(6);
  auto a = t.constant({2, 5}, random_values<float>(10, rng));
  auto b = t.constant({2, 3}, random_values<float>(6, rng));
  EXPECT_EQ(feature_matching<float>({a, b}, {a, b}).item(), 0.0f);
}

TEST(MaskLosses, GeneratorGradientMatchesFiniteDifferences) {
  for (int trial = 0; trial < 10; ++trial) {
    Rng rng(300 + trial);
    diff::ParameterSet<D> params;
    MaskGenerator<D> gm(params, rng);
    MaskDiscriminator<D> disc(params, 8, rng);
    const int n = 1 + rng.below(2);
    std::vector<int> y;
    for (int i = 0; i < n; ++i) y.push_back(rng.below(8));
    std::vector<D> truth(static_cast<std::size_t>(n) * glyph::kCropPixels);
    for (auto& v : truth) v = rng.uniform() < 0.4 ? 1.0 : 0.0;
    const auto x = smooth_fcr(n, params, "gen.mask.l0", rng);
    diff::ScalarGraph<D> f = [&](Tape<D>& t, Var<D> fcr) {
      return mask_generator_loss(t, disc, gm(t, fcr), t.constant({n, glyph::kCropPixels}, truth), y);
    };
    auto r = diff::grad_check(f, {n, kFcrDim}, x, 1e-4);
    EXPECT_TRUE(r.passed(1e-4)) << "trial " << trial << " err " << r.max_relative_error;
  }
}

TEST(MaskLosses, DiscriminatorGradientMatchesFiniteDifferences) {
  for (int trial = 0; trial < 10; ++trial) {
    Rng rng(400 + trial);
    diff::ParameterSet<D> params;
    MaskDiscriminator<D> disc(params, 8, rng);
    const int n = 1 + rng.below(2);
    std::vector<int> y;
    for (int i = 0; i < n; ++i) y.push_back(rng.below(8));
    const auto fake = random_values<D>(static_cast<std::size_t>(n) * glyph::kCropPixels, rng, 0, 1);
    const auto truth = random_values<D>(static_cast<std::size_t>(n) * glyph::kCropPixels, rng, 0, 1);
    // With respect to the last layer's weights: every score depends on them.
    auto& w = params.at("disc.l2.w");
    auto r = diff::grad_check_parameter<D>(
        [&](Tape<D>& t) { return mask_discriminator_loss(t, disc, fake, t.constant({n, glyph::kCropPixels}, truth), y); },
        w, 1e-4);
    EXPECT_TRUE(r.passed(1e-4)) << "trial " << trial << " err " << r.max_relative_error;
  }
}

// Generator-side terms never move D; the D step never moves G.
TEST_F(MaskGanTest, AlternatingUpdatesAreIsolated) {
  auto snapshot = [&](std::string_view prefix) {
    std::vector<float> v;
    for (auto* p : params_.with_prefix({prefix})) v.insert(v.end(), p->value.begin(), p->value.end());
    return v;
  };
  diff::Adam<float> g_opt(params_.with_prefix({"gen."}), {1e-2});
  diff::Adam<float> d_opt(params_.with_prefix({"disc."}), {4e-2});
  const std::vector<int> y = {2, 3};
  const auto truth = random_values<float>(2 * glyph::kCropPixels, rng_, 0, 1);
  const auto fcr = random_values<float>(2 * kFcrDim, rng_);

  const auto d0 = snapshot("disc."), g0 = snapshot("gen.");
  Tape<float> t;
  auto m = gm_(t, t.constant({2, kFcrDim}, fcr));
  t.backward(mask_generator_loss(t, disc_, m, t.constant({2, glyph::kCropPixels}, truth), y));
  for (auto* p : params_.with_prefix({"disc."}))
    for (float g : p->grad) ASSERT_EQ(g, 0.0f) << p->name;
  g_opt.step();
  EXPECT_EQ(snapshot("disc."), d0);
  EXPECT_NE(snapshot("gen."), g0);

  const auto g1 = snapshot("gen.");
  Tape<float> td;
  const std::vector<float> gen(m.value().begin(), m.value().end());
  td.backward(mask_discriminator_loss(td, disc_, gen, td.constant({2, glyph::kCropPixels}, truth), y));
  for (auto* p : params_.with_prefix({"gen."}))
    for (float g : p->grad) ASSERT_EQ(g, 0.0f) << p->name;
  d_opt.step();
  EXPECT_EQ(snapshot("gen."), g1);
  EXPECT_NE(snapshot("disc."), d0);
}

// ---- FCR classifier ----

TEST(FcrClassifier, UniformLogitsGiveLogC) {
  Rng rng(7);
  diff::ParameterSet<float> params;
  FcrClassifier<float> cls(params, 8, rng);
  for (auto* p : params.all()) std::fill(p->value.begin(), p->value.end(), 0.0f);
  Tape<float> t;
  EXPECT_NEAR(cls.loss(t, t.constant({2, kFcrDim}, random_values<float>(2 * kFcrDim, rng)), {1, 5}).item(),
              std::log(8.0), 1e-6);
}

TEST(FcrClassifier, GradientReachesFcrAndRejectsBadLabel) {
  Rng rng(8);
  diff::ParameterSet<float> params;
  FcrClassifier<float> cls(params, 8, rng);
  Tape<float> t;
  auto x = t.variable({2, kFcrDim}, random_values<float>(2 * kFcrDim, rng));
  t.backward(cls.loss(t, x, {0, 7}));
  double g = 0;
  for (float v : x.grad()) g += v * v;
  EXPECT_GT(g, 0);
  Tape<float> t2;
  EXPECT_THROW(cls.loss(t2, t2.zeros({1, kFcrDim}), {8}), Error);
}

// ---- composition ----

std::vector<float> full_mask() { return std::vector<float>(glyph::kCropPixels, 1.0f); }

TEST(Compose, SmallerObjectInFront) {
  // Areas 0.2 and 0.05, overlapping.
  const std::vector<BBox> boxes = {{0.1f, 0.1f, 0.5f, 0.6f}, {0.3f, 0.3f, 0.55f, 0.5f}};
  const auto l = compose_layout(boxes, {full_mask(), full_mask()}, {1, 2}, 9);
  // Pixel (25, 25): center (0.398, 0.398) lies in both boxes.
  EXPECT_EQ(l.at(25, 25), 2);
  EXPECT_EQ(l.at(10, 10), 1);
  EXPECT_EQ(l.at(60, 60), 9);
  // Same with the input order reversed.
  const auto r = compose_layout({boxes[1], boxes[0]}, {full_mask(), full_mask()}, {2, 1}, 9);
  EXPECT_EQ(r, l);
}

TEST(Compose, EqualAreaLowerIndexInFront) {
  // Exactly representable extents so the areas compare equal.
  const std::vector<BBox> boxes = {{0.25f, 0.25f, 0.75f, 0.75f}, {0.5f, 0.5f, 1.0f, 1.0f}};
  const auto l = compose_layout(boxes, {full_mask(), full_mask()}, {3, 4}, 8);
  EXPECT_EQ(l.at(40, 40), 3);
  const auto swapped = compose_layout({boxes[1], boxes[0]}, {full_mask(), full_mask()}, {4, 3}, 8);
  EXPECT_EQ(swapped.at(40, 40), 4);
}

TEST(Compose, EmptyListIsAllBackground) {
  const auto l = compose_layout({}, {}, {}, 9);
  EXPECT_EQ(l.ids.size(), static_cast<std::size_t>(kLayoutSize * kLayoutSize));
  for (int id : l.ids) EXPECT_EQ(id, 9);
}

TEST(Compose, MaskScaledIntoBoxWithNearestNeighbour) {
  std::vector<float> left_half(glyph::kCropPixels, 0.0f);
  for (int y = 0; y < glyph::kCropSize; ++y)
    for (int x = 0; x < glyph::kCropSize / 2; ++x) left_half[static_cast<std::size_t>(y * glyph::kCropSize + x)] = 0.7f;
  const auto l = compose_layout({{0, 0, 1, 1}}, {left_half}, {5}, 8);
  for (int y = 0; y < kLayoutSize; ++y)
    for (int x = 0; x < kLayoutSize; ++x) ASSERT_EQ(l.at(x, y), x < kLayoutSize / 2 ? 5 : 8);
}

TEST(Compose, Deterministic) {
  Rng rng(9);
  std::vector<BBox> boxes;
  std::vector<std::vector<float>> masks;
  for (int k = 0; k < 4; ++k) {
    boxes.push_back(random_box(rng));
    masks.push_back(random_values<float>(glyph::kCropPixels, rng, 0, 1));
  }
  EXPECT_EQ(compose_layout(boxes, masks, {0, 1, 2, 3}, 8), compose_layout(boxes, masks, {0, 1, 2, 3}, 8));
}

TEST(Palette, InjectiveAndInvertible) {
  std::set<std::tuple<int, int, int>> colors;
  for (int id = 0; id < kPaletteSize; ++id) {
    const Rgb c = palette_color(id);
    colors.insert({c.r, c.g, c.b});
    EXPECT_EQ(palette_lookup(c), id);
  }
  EXPECT_EQ(colors.size(), static_cast<std::size_t>(kPaletteSize));
  EXPECT_EQ(palette_lookup({1, 2, 3}), -1);
}

TEST(Colorize, RoundTripAndUniformBackground) {
  Rng rng(10);
  LayoutRaster l;
  l.ids.resize(kLayoutSize * kLayoutSize);
  for (auto& id : l.ids) id = rng.below(10);
  const auto img = colorize(l, 10);
  EXPECT_EQ(img.pixels.size(), static_cast<std::size_t>(3 * kLayoutSize * kLayoutSize));
  EXPECT_EQ(decolorize(img), l);

  const auto bg = colorize(compose_layout({}, {}, {}, 9), 10);
  std::set<std::tuple<int, int, int>> colors;
  for (std::size_t i = 0; i < bg.pixels.size(); i += 3) colors.insert({bg.pixels[i], bg.pixels[i + 1], bg.pixels[i + 2]});
  EXPECT_EQ(colors.size(), 1u);
}

TEST(Colorize, UnknownIdRejected) {
  LayoutRaster l;
  l.ids.assign(kLayoutSize * kLayoutSize, 0);
  l.ids[5] = 10;
  EXPECT_THROW(colorize(l, 10), Error);
}

TEST(Colorize, GroundTruthLayoutAccuracyIsOne) {
  glyph::Composition c;
  glyph::ObjectInstance o;
  o.class_id = 3;
  o.bbox = {0.2f, 0.2f, 0.7f, 0.6f};
  o.mask = full_mask();
  c.objects = {o};
  c.background = 1;
  const auto truth = ground_truth_layout(c, 8);
  EXPECT_EQ(truth.at(0, 0), 9);
  EXPECT_EQ(pixel_accuracy(truth, decolorize(colorize(truth, 10))), 1.0);
}

}  // namespace
}  // namespace sks::layout
