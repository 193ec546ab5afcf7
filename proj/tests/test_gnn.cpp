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

#include "sketchscene/gnn/gnn.hpp"
#include "testing.hpp"

namespace sks::gnn {
namespace {

using diff::Tape;
using diff::Var;
using glyph::BBox;
using testing::random_values;

class GnnTest : public ::testing::Test {
 protected:
  GnnTest() : rng_(21), fr_(params_, rng_), gnn_(params_, rng_) {}

  // CCR rows for nodes with features `v` [n, 128] laid out on `boxes`.
  std::vector<float> run(const std::vector<float>& v, const std::vector<BBox>& boxes) {
    Tape<float> tape;
    const auto batch = scenegraph::batch_graphs({scenegraph::build_graph(boxes)});
    auto r = batch.edges.empty() ? tape.zeros({0, kDim}) : fr_(tape, batch.edges);
    auto out = gnn_(tape, tape.constant({static_cast<int>(boxes.size()), kDim}, v), r, batch);
    return {out.value().begin(), out.value().end()};
  }

  Rng rng_;
  diff::ParameterSet<float> params_;
  scenegraph::RelationEmbedding<float> fr_;
  Gnn<float> gnn_;
};

TEST_F(GnnTest, SixLayersWithEdgeAndNodeMlps) {
  for (int k = 0; k < kLayers; ++k) {
    const std::string p = "gnn.l" + std::to_string(k);
    EXPECT_EQ(params_.at(p + ".fc1.w").shape, (diff::Shape{3 * kDim, 3 * kDim}));
    EXPECT_EQ(params_.at(p + ".fc2.w").shape, (diff::Shape{kDim, kDim}));
  }
  EXPECT_EQ(params_.find("gnn.l6.fc1.w"), nullptr);
}

TEST_F(GnnTest, SingleObjectIsNodeMlpChain) {
  Rng r(1);
  const auto v = random_values<float>(kDim, r);
  const auto out = run(v, {{0.1f, 0.1f, 0.4f, 0.4f}});
  // Reference: relu(fc2_k(.)) applied six times.
  Tape<float> tape;
  Var<float> x = tape.constant({1, kDim}, v);
  for (int k = 0; k < kLayers; ++k) {
    auto& w = params_.at("gnn.l" + std::to_string(k) + ".fc2.w");
    auto& b = params_.at("gnn.l" + std::to_string(k) + ".fc2.b");
    x = diff::relu(diff::linear(x, tape.frozen(w), tape.frozen(b)));
  }
  ASSERT_EQ(out.size(), static_cast<std::size_t>(kDim));
  for (int i = 0; i < kDim; ++i) EXPECT_FLOAT_EQ(out[static_cast<std::size_t>(i)], x.value()[static_cast<std::size_t>(i)]);
}

TEST(CandidateGroups, TwoObjectsPoolTwoCandidatesEach) {
  const auto batch = scenegraph::batch_graphs(
      {scenegraph::build_graph(std::vector<BBox>{{0, 0, 0.2f, 0.2f}, {0.5f, 0.5f, 0.9f, 0.9f}})});
  const auto groups = candidate_groups(batch);
  ASSERT_EQ(groups.size(), 2u);
  EXPECT_EQ(groups[0].size(), 2u);
  EXPECT_EQ(groups[1].size(), 2u);
  // Edge 0 is (0,1), edge 1 is (1,0). Rows [0, E) are source candidates,
  // [E, 2E) target candidates; each set is in edge order.
  EXPECT_EQ(groups[0], (std::vector<int>{0, 2 + 1}));
  EXPECT_EQ(groups[1], (std::vector<int>{2 + 0, 1}));
}

TEST(CandidateGroups, IsolatedNodePoolsItself) {
  const auto batch = scenegraph::batch_graphs(
      {scenegraph::build_graph(std::vector<BBox>{{0, 0, 0.2f, 0.2f}, {0.5f, 0.5f, 0.9f, 0.9f}}),
       scenegraph::build_graph(std::vector<BBox>{{0, 0, 0.2f, 0.2f}})});
  const auto groups = candidate_groups(batch);
  ASSERT_EQ(groups.size(), 3u);
  EXPECT_EQ(groups[2], (std::vector<int>{2 * 2 + 2}));
  for (std::size_t i = 0; i < 2; ++i) EXPECT_EQ(groups[i].size(), 2u);
}

TEST_F(GnnTest, OutputCountAndWidthMatchInput) {
  Rng r(2);
  std::vector<BBox> boxes = {{0, 0, 0.3f, 0.3f}, {0.5f, 0, 0.9f, 0.4f}, {0.2f, 0.5f, 0.6f, 0.9f}, {0.7f, 0.6f, 0.9f, 0.8f}};
  const auto out = run(random_values<float>(4 * kDim, r), boxes);
  EXPECT_EQ(out.size(), 4u * kDim);
  for (float x : out) EXPECT_TRUE(std::isfinite(x));
}

// Permuting the input objects permutes the CCR rows. Summation order of the
// pooled candidates follows edge order, which changes under permutation, so
// the comparison uses 1e-5.
TEST_F(GnnTest, PermutationEquivariance) {
  Rng r(3);
  const std::vector<BBox> boxes = {{0, 0, 0.3f, 0.3f}, {0.5f, 0, 0.9f, 0.4f}, {0.2f, 0.5f, 0.6f, 0.9f},
                                   {0.7f, 0.6f, 0.9f, 0.8f}, {0.05f, 0.05f, 0.95f, 0.95f}};
  const int n = static_cast<int>(boxes.size());
  const auto v = random_values<float>(static_cast<std::size_t>(n) * kDim, r);
  const auto base = run(v, boxes);
  const std::vector<int> perm = {2, 4, 0, 3, 1};
  std::vector<BBox> pb;
  std::vector<float> pv;
  for (int p : perm) {
    pb.push_back(boxes[static_cast<std::size_t>(p)]);
    pv.insert(pv.end(), v.begin() + p * kDim, v.begin() + (p + 1) * kDim);
  }
  const auto permuted = run(pv, pb);
  double worst = 0;
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < kDim; ++c)
      worst = std::max(worst, static_cast<double>(std::abs(permuted[static_cast<std::size_t>(i * kDim + c)] -
                                                           base[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)] * kDim + c)])));
  EXPECT_LE(worst, 1e-5);
}

TEST_F(GnnTest, GradientsReachInputsAndRelationTable) {
  Rng r(4);
  const std::vector<BBox> boxes = {{0, 0, 0.3f, 0.3f}, {0.5f, 0, 0.9f, 0.4f}, {0.2f, 0.5f, 0.6f, 0.9f}};
  Tape<float> tape;
  const auto batch = scenegraph::batch_graphs({scenegraph::build_graph(boxes)});
  auto v = tape.variable({3, kDim}, random_values<float>(3 * kDim, r));
  auto out = gnn_(tape, v, fr_(tape, batch.edges), batch);
  auto w = tape.constant(out.shape(), random_values<float>(out.numel(), r));
  tape.backward(diff::sum(diff::mul(out, w)));
  double gv = 0, gr = 0;
  for (float g : v.grad()) gv += g * g;
  for (float g : params_.at("sg.fr").grad) gr += g * g;
  EXPECT_GT(gv, 0);
  EXPECT_GT(gr, 0);
}

TEST_F(GnnTest, NodeCountMismatchRejected) {
  Tape<float> tape;
  const auto batch = scenegraph::batch_graphs({scenegraph::build_graph(std::vector<BBox>{{0, 0, 0.3f, 0.3f}})});
  EXPECT_THROW(gnn_(tape, tape.zeros({2, kDim}), tape.zeros({0, kDim}), batch), diff::ShapeError);
}

}  // namespace
}  // namespace sks::gnn
