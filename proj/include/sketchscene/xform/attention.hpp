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

// Attention stack over [SR slot, object 1, ..., object n] with a learned
// 5x5 grid positional table. Slot 0 yields the scene representation (SR),
// the others the freely-correlated representation (FCR).

#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "sketchscene/diff/layers.hpp"
#include "sketchscene/glyph/types.hpp"

namespace sks::xform {

inline constexpr int kDim = 128;
inline constexpr int kHeads = 16;
inline constexpr int kLayers = 3;
inline constexpr int kFeedForward = 256;
inline constexpr int kGrid = 5;
inline constexpr int kSrCell = kGrid * kGrid;  // positional index of the SR slot

inline int grid_cell(float cx, float cy) {
  const int col = std::clamp(static_cast<int>(std::floor(cx * kGrid)), 0, kGrid - 1);
  const int row = std::clamp(static_cast<int>(std::floor(cy * kGrid)), 0, kGrid - 1);
  return kGrid * row + col;
}

inline int grid_cell(const glyph::BBox& b) { return grid_cell(b.cx(), b.cy()); }

struct XformOptions {
  bool positional_encoding = true;
  bool plain_attention = false;  // literal softmax(QK^T)V layers: no scaling, projection, residual or norm
};

template <class T>
struct SceneOutputs {
  diff::Var<T> sr;   // [scenes, 128]
  diff::Var<T> fcr;  // [objects, 128], scene-major like the input
};

template <class T>
class AttentionStack {
 public:
  AttentionStack() = default;
  AttentionStack(diff::ParameterSet<T>& params, Rng& rng, XformOptions options = {}) : options_(options) {
    if (options_.positional_encoding) position_ = diff::Embedding<T>(params, "xf.pos", kSrCell + 1, kDim, rng);
    for (int i = 0; i < kLayers; ++i) {
      const std::string p = "xf.l" + std::to_string(i);
      Layer l;
      l.q = diff::Linear<T>(params, p + ".q", kDim, kDim, rng);
      l.k = diff::Linear<T>(params, p + ".k", kDim, kDim, rng);
      l.v = diff::Linear<T>(params, p + ".v", kDim, kDim, rng);
      if (!options_.plain_attention) {
        l.o = diff::Linear<T>(params, p + ".o", kDim, kDim, rng);
        l.ff1 = diff::Linear<T>(params, p + ".ff1", kDim, kFeedForward, rng);
        l.ff2 = diff::Linear<T>(params, p + ".ff2", kFeedForward, kDim, rng);
        l.ln1_gain = &ones(params.add(p + ".ln1.g", {kDim}));
        l.ln1_bias = &params.add(p + ".ln1.b", {kDim});
        l.ln2_gain = &ones(params.add(p + ".ln2.g", {kDim}));
        l.ln2_bias = &params.add(p + ".ln2.b", {kDim});
      }
      layers_.push_back(l);
    }
  }

  // ccr holds the objects of every scene back to back; counts[s] objects
  // belong to scene s and cells gives each object's grid position.
  // weights_out, when set, receives layer-0 attention weights.
  SceneOutputs<T> operator()(diff::Tape<T>& tape, diff::Var<T> ccr, const std::vector<int>& counts,
                             const std::vector<int>& cells, diff::AttentionWeights<T>* weights_out = nullptr) const {
    if (static_cast<int>(cells.size()) != ccr.rows())
      throw diff::ShapeError("op 'fcr_sr_forward': " + std::to_string(ccr.rows()) + " CCR rows but " +
                             std::to_string(cells.size()) + " grid cells");
    int total = 0;
    for (int c : counts) {
      if (c < 1) throw Error("fcr_sr_forward: scene without objects");
      total += c;
    }
    if (total != ccr.rows()) throw diff::ShapeError("op 'fcr_sr_forward': scene counts do not cover the CCR rows");
    for (int c : cells)
      if (c < 0 || c >= kSrCell) throw Error("fcr_sr_forward: grid cell " + std::to_string(c) + " outside [0, 24]");

    // Sequence layout: per scene, the SR slot then its objects.
    auto padded = diff::concat<T>({tape.zeros({1, kDim}), ccr}, 0);
    std::vector<int> rows, positions, sr_rows, fcr_rows;
    std::vector<diff::Segment> segments;
    int obj = 0;
    for (int c : counts) {
      segments.push_back({static_cast<int>(rows.size()), c + 1});
      sr_rows.push_back(static_cast<int>(rows.size()));
      rows.push_back(0);
      positions.push_back(kSrCell);
      for (int k = 0; k < c; ++k, ++obj) {
        fcr_rows.push_back(static_cast<int>(rows.size()));
        rows.push_back(obj + 1);
        positions.push_back(cells[static_cast<std::size_t>(obj)]);
      }
    }
    diff::Var<T> h = diff::gather_rows(padded, rows);
    if (options_.positional_encoding) h = diff::add(h, position_(tape, positions));

    for (std::size_t i = 0; i < layers_.size(); ++i) {
      const Layer& l = layers_[i];
      auto q = l.q(tape, h), k = l.k(tape, h), v = l.v(tape, h);
      if (options_.plain_attention) {
        h = diff::multi_head_attention(q, k, v, kHeads, segments, T(1), i == 0 ? weights_out : nullptr);
        continue;
      }
      const T scale = T(1) / std::sqrt(static_cast<T>(kDim / kHeads));
      auto a = diff::multi_head_attention(q, k, v, kHeads, segments, scale, i == 0 ? weights_out : nullptr);
      h = diff::layer_norm(diff::add(h, l.o(tape, a)), tape.param(*l.ln1_gain), tape.param(*l.ln1_bias));
      auto ff = l.ff2(tape, diff::relu(l.ff1(tape, h)));
      h = diff::layer_norm(diff::add(h, ff), tape.param(*l.ln2_gain), tape.param(*l.ln2_bias));
    }
    return {diff::gather_rows(h, sr_rows), diff::gather_rows(h, fcr_rows)};
  }

  const XformOptions& options() const { return options_; }

 private:
  struct Layer {
    diff::Linear<T> q, k, v, o, ff1, ff2;
    diff::Parameter<T>* ln1_gain = nullptr;
    diff::Parameter<T>* ln1_bias = nullptr;
    diff::Parameter<T>* ln2_gain = nullptr;
    diff::Parameter<T>* ln2_bias = nullptr;
  };

  static diff::Parameter<T>& ones(diff::Parameter<T>& p) {
    std::fill(p.value.begin(), p.value.end(), T(1));
    return p;
  }

  XformOptions options_;
  diff::Embedding<T> position_;
  std::vector<Layer> layers_;
};

}  // namespace sks::xform
