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

// Graph layers producing the constrained-correlated representation (CCR).
// Each layer runs an edge MLP over <v_i, r_ij, v_j>, splits the result into
// two node candidates and a new edge vector, averages every object's
// candidates and maps the average through a node MLP.

#pragma once

#include <string>
#include <vector>

#include "sketchscene/diff/layers.hpp"
#include "sketchscene/scenegraph/graph.hpp"

namespace sks::gnn {

inline constexpr int kDim = 128;
inline constexpr int kLayers = 6;

// Rows of the candidate matrix [edges as source | edges as target | nodes]
// pooled for each node, in edge order. A node without edges pools its own
// row, which makes the layer the node MLP alone.
inline std::vector<std::vector<int>> candidate_groups(const scenegraph::GraphBatch& batch) {
  const int e = static_cast<int>(batch.edges.size());
  std::vector<std::vector<int>> groups(static_cast<std::size_t>(batch.num_nodes));
  for (int k = 0; k < e; ++k) {
    const auto& edge = batch.edges[static_cast<std::size_t>(k)];
    groups[static_cast<std::size_t>(edge.source)].push_back(k);
    groups[static_cast<std::size_t>(edge.target)].push_back(e + k);
  }
  for (int i = 0; i < batch.num_nodes; ++i)
    if (groups[static_cast<std::size_t>(i)].empty()) groups[static_cast<std::size_t>(i)].push_back(2 * e + i);
  return groups;
}

template <class T>
class GraphLayer {
 public:
  GraphLayer() = default;
  GraphLayer(diff::ParameterSet<T>& params, const std::string& name, Rng& rng)
      : edge_(params, name + ".fc1", 3 * kDim, 3 * kDim, rng), node_(params, name + ".fc2", kDim, kDim, rng) {}

  // v [N, 128], r [E, 128] -> (v', r').
  std::pair<diff::Var<T>, diff::Var<T>> operator()(diff::Tape<T>& tape, diff::Var<T> v, diff::Var<T> r,
                                                   const scenegraph::GraphBatch& batch,
                                                   const std::vector<std::vector<int>>& groups) const {
    if (batch.edges.empty()) return {diff::relu(node_(tape, v)), r};
    std::vector<int> src, tgt;
    for (const auto& e : batch.edges) {
      src.push_back(e.source);
      tgt.push_back(e.target);
    }
    auto triple = diff::concat<T>({diff::gather_rows(v, src), r, diff::gather_rows(v, tgt)}, 1);
    auto out = diff::relu(edge_(tape, triple));
    auto cand_s = diff::slice(out, 1, 0, kDim);
    auto r_next = diff::slice(out, 1, kDim, kDim);
    auto cand_t = diff::slice(out, 1, 2 * kDim, kDim);
    auto candidates = diff::concat<T>({cand_s, cand_t, v}, 0);
    auto pooled = diff::segment_mean(candidates, groups);
    return {diff::relu(node_(tape, pooled)), r_next};
  }

 private:
  diff::Linear<T> edge_;
  diff::Linear<T> node_;
};

template <class T>
class Gnn {
 public:
  Gnn() = default;
  Gnn(diff::ParameterSet<T>& params, Rng& rng) {
    for (int k = 0; k < kLayers; ++k) layers_.emplace_back(params, "gnn.l" + std::to_string(k), rng);
  }

  // v: OLR rows of every node in the batch; r: f_r rows of every edge.
  diff::Var<T> operator()(diff::Tape<T>& tape, diff::Var<T> v, diff::Var<T> r,
                          const scenegraph::GraphBatch& batch) const {
    if (batch.num_nodes == 0 || v.rows() != batch.num_nodes)
      throw diff::ShapeError("op 'ccr_forward': " + std::to_string(v.rows()) + " node rows for " +
                             std::to_string(batch.num_nodes) + " graph nodes");
    const auto groups = candidate_groups(batch);
    for (const auto& layer : layers_) std::tie(v, r) = layer(tape, v, r, batch, groups);
    return v;
  }

 private:
  std::vector<GraphLayer<T>> layers_;
};

}  // namespace sks::gnn
