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

// Scene graph: one node per object and a typed edge for every ordered pair.

#pragma once

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "sketchscene/diff/layers.hpp"
#include "sketchscene/glyph/types.hpp"

namespace sks::scenegraph {

enum class Relation { kLeftOf = 0, kRightOf, kAbove, kBelow, kContains, kInsideOf };
inline constexpr int kRelationCount = 6;
inline constexpr int kRelationDim = 128;

inline Relation inverse(Relation r) {
  static constexpr std::array<Relation, kRelationCount> inv = {Relation::kRightOf, Relation::kLeftOf,
                                                               Relation::kBelow,   Relation::kAbove,
                                                               Relation::kInsideOf, Relation::kContains};
  return inv[static_cast<std::size_t>(r)];
}

inline std::string to_string(Relation r) {
  static const char* names[] = {"left_of", "right_of", "above", "below", "contains", "inside_of"};
  return names[static_cast<int>(r)];
}

inline bool strictly_contains(const glyph::BBox& outer, const glyph::BBox& inner) {
  return outer.x0 < inner.x0 && outer.y0 < inner.y0 && outer.x1 > inner.x1 && outer.y1 > inner.y1;
}

// Relation of box i to box j. Containment first, then the dominant axis of
// the center offset (y grows downward, so j below i means i is Above).
// Equal-magnitude offsets go to the horizontal pair; identical centers are
// ordered by the boxes' corner coordinates.
inline Relation infer_relation(const glyph::BBox& i, const glyph::BBox& j) {
  if (strictly_contains(i, j)) return Relation::kContains;
  if (strictly_contains(j, i)) return Relation::kInsideOf;
  const float dx = j.cx() - i.cx();
  const float dy = j.cy() - i.cy();
  if (std::abs(dx) >= std::abs(dy)) {
    if (dx > 0) return Relation::kLeftOf;
    if (dx < 0) return Relation::kRightOf;
    const std::array<float, 4> a = {i.x0, i.y0, i.x1, i.y1}, b = {j.x0, j.y0, j.x1, j.y1};
    for (std::size_t k = 0; k < 4; ++k) {
      if (a[k] < b[k]) return Relation::kLeftOf;
      if (a[k] > b[k]) return Relation::kRightOf;
    }
    return Relation::kLeftOf;  // identical boxes: no inverse-consistent choice exists
  }
  return dy > 0 ? Relation::kAbove : Relation::kBelow;
}

struct Edge {
  int source = 0;
  int target = 0;
  Relation relation = Relation::kLeftOf;
};

// Topology of one scene; node features are computed separately by the
// object encoder.
struct SceneGraph {
  int num_nodes = 0;
  std::vector<Edge> edges;  // every ordered pair (i, j), i != j, lexicographic
};

inline SceneGraph build_graph(const std::vector<glyph::BBox>& boxes) {
  if (boxes.empty()) throw Error("build_graph: scene has no objects");
  SceneGraph g;
  g.num_nodes = static_cast<int>(boxes.size());
  for (int i = 0; i < g.num_nodes; ++i)
    for (int j = 0; j < g.num_nodes; ++j)
      if (i != j) g.edges.push_back({i, j, infer_relation(boxes[static_cast<std::size_t>(i)], boxes[static_cast<std::size_t>(j)])});
  return g;
}

inline SceneGraph build_graph(const glyph::Composition& comp) {
  std::vector<glyph::BBox> boxes;
  for (const auto& o : comp.objects) boxes.push_back(o.bbox);
  return build_graph(boxes);
}

// Disjoint union of several scene graphs with global node numbering.
struct GraphBatch {
  int num_nodes = 0;
  std::vector<int> node_offset;  // first global node of each scene
  std::vector<int> node_count;
  std::vector<Edge> edges;       // global indices, scene-major, lexicographic within a scene
};

inline GraphBatch batch_graphs(const std::vector<SceneGraph>& graphs) {
  GraphBatch b;
  for (const auto& g : graphs) {
    b.node_offset.push_back(b.num_nodes);
    b.node_count.push_back(g.num_nodes);
    for (const auto& e : g.edges) b.edges.push_back({e.source + b.num_nodes, e.target + b.num_nodes, e.relation});
    b.num_nodes += g.num_nodes;
  }
  return b;
}

// f_r: one learnable row per relation.
template <class T>
class RelationEmbedding {
 public:
  RelationEmbedding() = default;
  RelationEmbedding(diff::ParameterSet<T>& params, Rng& rng)
      : table_(params, "sg.fr", kRelationCount, kRelationDim, rng) {}

  diff::Var<T> operator()(diff::Tape<T>& tape, const std::vector<Edge>& edges, bool freeze = false) const {
    std::vector<int> ids;
    ids.reserve(edges.size());
    for (const auto& e : edges) ids.push_back(static_cast<int>(e.relation));
    return table_(tape, ids, freeze);
  }

  const diff::Embedding<T>& table() const { return table_; }

 private:
  diff::Embedding<T> table_;
};

}  // namespace sks::scenegraph
