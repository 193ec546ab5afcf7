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
#include <set>

#include "sketchscene/xform/attention.hpp"
#include "testing.hpp"

namespace sks::xform {
namespace {

using diff::Tape;
using testing::random_values;

TEST(GridCell, Oracles) {
  EXPECT_EQ(grid_cell(0.5f, 0.5f), 12);
  EXPECT_EQ(grid_cell(0.05f, 0.05f), 0);
  EXPECT_EQ(grid_cell(0.99f, 0.99f), 24);
  EXPECT_EQ(grid_cell(1.0f, 1.0f), 24);
  EXPECT_EQ(grid_cell(0.9f, 0.1f), 4);  // row-major, row is vertical
  EXPECT_EQ(grid_cell(0.1f, 0.9f), 20);
}

TEST(GridCell, SweepCoversAllCells) {
  std::set<int> seen;
  for (int i = 0; i < 100; ++i)
    for (int j = 0; j < 100; ++j) {
      const int c = grid_cell((i + 0.5f) / 100.0f, (j + 0.5f) / 100.0f);
      ASSERT_GE(c, 0);
      ASSERT_LT(c, 25);
      seen.insert(c);
    }
  EXPECT_EQ(seen.size(), 25u);
}

TEST(GridCell, FromBoxUsesMidpoint) { EXPECT_EQ(grid_cell(glyph::BBox{0.4f, 0.4f, 0.6f, 0.6f}), 12); }

class XformTest : public ::testing::TestWithParam<bool> {
 protected:
  XformTest() : rng_(31) {
    XformOptions o;
    o.plain_attention = GetParam();
    stack_ = AttentionStack<float>(params_, rng_, o);
  }

  SceneOutputs<float> run(Tape<float>& tape, const std::vector<float>& ccr, const std::vector<int>& counts,
                          const std::vector<int>& cells, diff::AttentionWeights<float>* w = nullptr) {
    return stack_(tape, tape.constant({static_cast<int>(cells.size()), kDim}, ccr), counts, cells, w);
  }

  Rng rng_;
  diff::ParameterSet<float> params_;
  AttentionStack<float> stack_;
};

TEST_P(XformTest, SrInvariantAndFcrEquivariantUnderPermutation) {
  Rng r(1);
  const int n = 5;
  const auto ccr = random_values<float>(n * kDim, r);
  const std::vector<int> cells = {3, 12, 12, 20, 7};
  Tape<float> t1;
  const auto base = run(t1, ccr, {n}, cells);
  const std::vector<int> perm = {4, 2, 0, 1, 3};
  std::vector<float> pc;
  std::vector<int> pcells;
  for (int p : perm) {
    pc.insert(pc.end(), ccr.begin() + p * kDim, ccr.begin() + (p + 1) * kDim);
    pcells.push_back(cells[static_cast<std::size_t>(p)]);
  }
  Tape<float> t2;
  const auto permuted = run(t2, pc, {n}, pcells);
  double sr_dev = 0, fcr_dev = 0;
  for (int c = 0; c < kDim; ++c)
    sr_dev = std::max(sr_dev, static_cast<double>(std::abs(base.sr.value()[c] - permuted.sr.value()[c])));
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < kDim; ++c)
      fcr_dev = std::max(fcr_dev, static_cast<double>(std::abs(permuted.fcr.value()[i * kDim + c] -
                                                               base.fcr.value()[perm[static_cast<std::size_t>(i)] * kDim + c])));
  EXPECT_LE(sr_dev, 1e-5);
  EXPECT_LE(fcr_dev, 1e-5);
}

TEST_P(XformTest, IdenticalObjectsInOneCellGetIdenticalFcr) {
  Rng r(2);
  auto one = random_values<float>(kDim, r);
  auto other = random_values<float>(kDim, r);
  std::vector<float> ccr(one);
  ccr.insert(ccr.end(), other.begin(), other.end());
  ccr.insert(ccr.end(), one.begin(), one.end());
  Tape<float> t;
  const auto out = run(t, ccr, {3}, {6, 18, 6});
  for (int c = 0; c < kDim; ++c) EXPECT_EQ(out.fcr.value()[c], out.fcr.value()[2 * kDim + c]);
}

TEST_P(XformTest, OutputsDependOnBoxesOnlyThroughCell) {
  Rng r(3);
  const auto ccr = random_values<float>(2 * kDim, r);
  const glyph::BBox a{0.41f, 0.42f, 0.5f, 0.5f}, a_moved{0.45f, 0.44f, 0.53f, 0.55f}, b{0.0f, 0.0f, 0.1f, 0.1f};
  ASSERT_EQ(grid_cell(a), grid_cell(a_moved));
  Tape<float> t1, t2;
  const auto o1 = run(t1, ccr, {2}, {grid_cell(a), grid_cell(b)});
  const auto o2 = run(t2, ccr, {2}, {grid_cell(a_moved), grid_cell(b)});
  EXPECT_TRUE(std::equal(o1.sr.value().begin(), o1.sr.value().end(), o2.sr.value().begin()));
  EXPECT_TRUE(std::equal(o1.fcr.value().begin(), o1.fcr.value().end(), o2.fcr.value().begin()));
}

TEST_P(XformTest, AttentionRowsSumToOne) {
  Rng r(4);
  diff::AttentionWeights<float> w;
  Tape<float> t;
  run(t, random_values<float>(5 * kDim, r), {2, 3}, {0, 1, 2, 3, 4}, &w);
  ASSERT_EQ(w.size(), static_cast<std::size_t>(2 * kHeads));
  for (std::size_t blk = 0; blk < w.size(); ++blk) {
    const int len = blk < static_cast<std::size_t>(kHeads) ? 3 : 4;  // SR slot plus objects
    ASSERT_EQ(w[blk].size(), static_cast<std::size_t>(len * len));
    for (int row = 0; row < len; ++row) {
      double s = 0;
      for (int c = 0; c < len; ++c) s += w[blk][static_cast<std::size_t>(row * len + c)];
      EXPECT_NEAR(s, 1.0, 1e-6);
    }
  }
}

TEST_P(XformTest, ScenesInOneBatchDoNotInteract) {
  Rng r(5);
  const auto a = random_values<float>(2 * kDim, r), b = random_values<float>(3 * kDim, r);
  std::vector<float> both(a);
  both.insert(both.end(), b.begin(), b.end());
  Tape<float> t1, t2;
  const auto joint = run(t1, both, {2, 3}, {1, 2, 3, 4, 5});
  const auto alone = run(t2, a, {2}, {1, 2});
  for (int c = 0; c < kDim; ++c) EXPECT_NEAR(joint.sr.value()[c], alone.sr.value()[c], 1e-5);
  EXPECT_EQ(joint.sr.rows(), 2);
  EXPECT_EQ(joint.fcr.rows(), 5);
}

TEST_P(XformTest, LengthMismatchRejected) {
  Tape<float> t;
  EXPECT_THROW(stack_(t, t.zeros({3, kDim}), {3}, {1, 2}), diff::ShapeError);
  EXPECT_THROW(stack_(t, t.zeros({2, kDim}), {3}, {1, 2}), diff::ShapeError);
  EXPECT_THROW(stack_(t, t.zeros({2, kDim}), {2}, {1, 25}), Error);
}

TEST_P(XformTest, ParameterLayout) {
  EXPECT_EQ(params_.at("xf.pos").shape, (diff::Shape{26, kDim}));
  for (int i = 0; i < kLayers; ++i) {
    const std::string p = "xf.l" + std::to_string(i);
    EXPECT_EQ(params_.at(p + ".q.w").shape, (diff::Shape{kDim, kDim}));
    EXPECT_EQ(params_.find(p + ".o.w") != nullptr, !GetParam());
    EXPECT_EQ(params_.find(p + ".ln1.g") != nullptr, !GetParam());
  }
  EXPECT_EQ(params_.find("xf.l3.q.w"), nullptr);
  EXPECT_EQ(kHeads * (kDim / kHeads), kDim);
  EXPECT_EQ(kDim / kHeads, 8);
}

INSTANTIATE_TEST_SUITE_P(Variants, XformTest, ::testing::Values(false, true),
                         [](const ::testing::TestParamInfo<bool>& i) { return i.param ? "Plain" : "Transformer"; });

TEST(Xform, NoPositionalEncodingDropsTable) {
  Rng rng(6);
  diff::ParameterSet<float> params;
  XformOptions o;
  o.positional_encoding = false;
  AttentionStack<float> s(params, rng, o);
  EXPECT_EQ(params.find("xf.pos"), nullptr);
  // Without E, cells do not matter.
  Rng r(7);
  const auto ccr = random_values<float>(2 * kDim, r);
  Tape<float> t1, t2;
  auto a = s(t1, t1.constant({2, kDim}, ccr), {2}, {0, 1});
  auto b = s(t2, t2.constant({2, kDim}, ccr), {2}, {24, 13});
  EXPECT_TRUE(std::equal(a.sr.value().begin(), a.sr.value().end(), b.sr.value().begin()));
}

TEST(Xform, PositionalEncodingChangesOutputWithCell) {
  Rng rng(8);
  diff::ParameterSet<float> params;
  AttentionStack<float> s(params, rng);
  Rng r(9);
  const auto ccr = random_values<float>(2 * kDim, r);
  Tape<float> t1, t2;
  auto a = s(t1, t1.constant({2, kDim}, ccr), {2}, {0, 1});
  auto b = s(t2, t2.constant({2, kDim}, ccr), {2}, {24, 13});
  EXPECT_FALSE(std::equal(a.sr.value().begin(), a.sr.value().end(), b.sr.value().begin()));
}

}  // namespace
}  // namespace sks::xform
