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

#include <set>

#include "sketchscene/scenegraph/graph.hpp"

namespace sks::scenegraph {
namespace {

using glyph::BBox;

BBox random_box(Rng& rng) {
  const float w = static_cast<float>(rng.uniform(0.02, 0.6)), h = static_cast<float>(rng.uniform(0.02, 0.6));
  const float x = static_cast<float>(rng.uniform(0, 1 - w)), y = static_cast<float>(rng.uniform(0, 1 - h));
  return {x, y, x + w, y + h};
}

TEST(Relation, InversePairs) {
  EXPECT_EQ(inverse(Relation::kLeftOf), Relation::kRightOf);
  EXPECT_EQ(inverse(Relation::kAbove), Relation::kBelow);
  EXPECT_EQ(inverse(Relation::kContains), Relation::kInsideOf);
  for (int r = 0; r < kRelationCount; ++r) EXPECT_EQ(inverse(inverse(static_cast<Relation>(r))), static_cast<Relation>(r));
}

TEST(InferRelation, HorizontalOffset) {
  EXPECT_EQ(infer_relation({0, 0, 0.2f, 0.2f}, {0.8f, 0, 1, 0.2f}), Relation::kLeftOf);
  EXPECT_EQ(infer_relation({0.8f, 0, 1, 0.2f}, {0, 0, 0.2f, 0.2f}), Relation::kRightOf);
}

TEST(InferRelation, StrictContainment) {
  EXPECT_EQ(infer_relation({0, 0, 1, 1}, {0.4f, 0.4f, 0.6f, 0.6f}), Relation::kContains);
  EXPECT_EQ(infer_relation({0.4f, 0.4f, 0.6f, 0.6f}, {0, 0, 1, 1}), Relation::kInsideOf);
  // Sharing an edge is not strict containment.
  EXPECT_NE(infer_relation({0, 0, 1, 1}, {0, 0.4f, 0.6f, 0.6f}), Relation::kContains);
}

TEST(InferRelation, VerticalUsesImageCoordinates) {
  // j lower on the page (larger y): i is above j.
  EXPECT_EQ(infer_relation({0.4f, 0, 0.6f, 0.2f}, {0.4f, 0.7f, 0.6f, 0.9f}), Relation::kAbove);
  EXPECT_EQ(infer_relation({0.4f, 0.7f, 0.6f, 0.9f}, {0.4f, 0, 0.6f, 0.2f}), Relation::kBelow);
}

TEST(InferRelation, EqualOffsetsGoHorizontal) {
  EXPECT_EQ(infer_relation({0, 0, 0.2f, 0.2f}, {0.5f, 0.5f, 0.7f, 0.7f}), Relation::kLeftOf);
}

TEST(InferRelation, InverseSymmetryOverTenThousandPairs) {
  Rng rng(11);
  int mismatches = 0;
  for (int k = 0; k < 10000; ++k) {
    const BBox a = random_box(rng), b = random_box(rng);
    if (infer_relation(a, b) != inverse(infer_relation(b, a))) ++mismatches;
  }
  EXPECT_EQ(mismatches, 0);
}

TEST(InferRelation, SameCenterTieIsInverseConsistent) {
  const BBox a{0.3f, 0.3f, 0.5f, 0.7f}, b{0.2f, 0.4f, 0.6f, 0.6f};  // same center, neither contains the other
  EXPECT_EQ(infer_relation(a, b), inverse(infer_relation(b, a)));
}

TEST(InferRelation, ScaleInvariantAboutSceneCenter) {
  Rng rng(12);
  for (int k = 0; k < 2000; ++k) {
    const BBox a = random_box(rng), b = random_box(rng);
    auto scaled = [](const BBox& x) {
      auto s = [](float v) { return 0.5f + 0.5f * (v - 0.5f); };
      return BBox{s(x.x0), s(x.y0), s(x.x1), s(x.y1)};
    };
    EXPECT_EQ(infer_relation(a, b), infer_relation(scaled(a), scaled(b))) << k;
  }
}

TEST(BuildGraph, EdgeCounts) {
  EXPECT_EQ(build_graph(std::vector<BBox>{{0, 0, 0.2f, 0.2f}}).edges.size(), 0u);
  const auto g = build_graph(std::vector<BBox>{{0, 0, 0.2f, 0.2f}, {0.5f, 0, 0.7f, 0.2f}, {0, 0.5f, 0.2f, 0.7f}});
  EXPECT_EQ(g.num_nodes, 3);
  EXPECT_EQ(g.edges.size(), 6u);
  std::set<std::pair<int, int>> pairs;
  for (const auto& e : g.edges) pairs.insert({e.source, e.target});
  EXPECT_EQ(pairs.size(), 6u);
}

TEST(BuildGraph, EmptySceneRejected) { EXPECT_THROW(build_graph(std::vector<BBox>{}), Error); }

TEST(BuildGraph, PermutationRelabelsEdgesConsistently) {
  Rng rng(13);
  std::vector<BBox> boxes;
  for (int i = 0; i < 5; ++i) boxes.push_back(random_box(rng));
  const std::vector<int> perm = {3, 0, 4, 1, 2};  // new position p holds old object perm[p]
  std::vector<BBox> permuted;
  for (int p : perm) permuted.push_back(boxes[static_cast<std::size_t>(p)]);
  const auto g = build_graph(boxes), h = build_graph(permuted);
  std::map<std::pair<int, int>, Relation> old_rel;
  for (const auto& e : g.edges) old_rel[{e.source, e.target}] = e.relation;
  for (const auto& e : h.edges)
    EXPECT_EQ(e.relation, (old_rel[{perm[static_cast<std::size_t>(e.source)], perm[static_cast<std::size_t>(e.target)]}]));
}

TEST(BatchGraphs, OffsetsNodeIndices) {
  const auto a = build_graph(std::vector<BBox>{{0, 0, 0.2f, 0.2f}, {0.5f, 0, 0.7f, 0.2f}});
  const auto b = build_graph(std::vector<BBox>{{0, 0, 0.2f, 0.2f}});
  const auto batch = batch_graphs({a, b, a});
  EXPECT_EQ(batch.num_nodes, 5);
  EXPECT_EQ(batch.node_offset, (std::vector<int>{0, 2, 3}));
  ASSERT_EQ(batch.edges.size(), 4u);
  EXPECT_EQ(batch.edges[2].source, 3);
  EXPECT_EQ(batch.edges[2].target, 4);
}

TEST(RelationEmbedding, DistinctRowsOfOneTable) {
  Rng rng(14);
  diff::ParameterSet<float> params;
  RelationEmbedding<float> fr(params, rng);
  ASSERT_NE(params.find("sg.fr"), nullptr);
  EXPECT_EQ(params.at("sg.fr").shape, (diff::Shape{kRelationCount, kRelationDim}));
  std::vector<Edge> edges;
  for (int r = 0; r < kRelationCount; ++r) edges.push_back({0, 1, static_cast<Relation>(r)});
  diff::Tape<float> tape;
  auto v = fr(tape, edges);
  ASSERT_EQ(v.shape(), (diff::Shape{kRelationCount, kRelationDim}));
  std::set<std::vector<float>> rows;
  for (int r = 0; r < kRelationCount; ++r)
    rows.insert({v.value().begin() + r * kRelationDim, v.value().begin() + (r + 1) * kRelationDim});
  EXPECT_EQ(rows.size(), static_cast<std::size_t>(kRelationCount));
}

}  // namespace
}  // namespace sks::scenegraph
