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

// Full scene model: objects -> OLR -> scene graph -> CCR -> attention ->
// (SR, FCR) -> layout heads. The parameter registry depends on the ablation
// flags, so every flag removes or replaces exactly its own subgraph.

#pragma once

#include <memory>
#include <vector>

#include "sketchscene/gnn/gnn.hpp"
#include "sketchscene/layout/generators.hpp"
#include "sketchscene/olr/encoder.hpp"
#include "sketchscene/pipeline/config.hpp"
#include "sketchscene/scenegraph/graph.hpp"
#include "sketchscene/xform/attention.hpp"

namespace sks::pipeline {

template <class T>
struct Forward {
  diff::Var<T> olr;  // [objects, 128]
  diff::Var<T> ccr;  // [objects, 128]
  diff::Var<T> sr;   // [scenes, 128]
  diff::Var<T> fcr;  // [objects, 128]
  std::vector<int> counts;
  std::vector<int> classes;
  std::vector<glyph::BBox> boxes;
};

template <class T>
class SceneModel {
 public:
  SceneModel(int num_classes, const Ablations& flags, std::uint64_t seed) : num_classes_(num_classes), flags_(flags) {
    Rng rng(seed ^ 0x5ce9e5ca1ab1e5ULL);
    params_ = std::make_unique<diff::ParameterSet<T>>();
    auto& p = *params_;
    encoder_ = olr::ObjectEncoder<T>(p, num_classes, rng);
    if (flags.no_gnn) {
      bridge_ = diff::Linear<T>(p, "gnn.bridge", gnn::kDim, gnn::kDim, rng);
    } else {
      relations_ = scenegraph::RelationEmbedding<T>(p, rng);
      gnn_ = gnn::Gnn<T>(p, rng);
    }
    if (!flags.no_transformer) {
      xform::XformOptions xo;
      xo.positional_encoding = !flags.no_positional_encoding;
      xo.plain_attention = flags.plain_attention;
      xform_ = xform::AttentionStack<T>(p, rng, xo);
    }
    if (!flags.no_generation_losses) {
      boxes_ = layout::BoxGenerator<T>(p, rng);
      masks_ = layout::MaskGenerator<T>(p, rng);
      fcr_classifier_ = layout::FcrClassifier<T>(p, num_classes, rng);
      discriminator_ = layout::MaskDiscriminator<T>(p, num_classes, rng);
    }
  }

  SceneModel(const SceneModel&) = delete;
  SceneModel& operator=(const SceneModel&) = delete;

  Forward<T> forward(diff::Tape<T>& tape, const std::vector<const glyph::Composition*>& scenes) const {
    if (scenes.empty()) throw Error("forward: no scenes");
    Forward<T> out;
    std::vector<const glyph::ObjectInstance*> objects;
    std::vector<scenegraph::SceneGraph> graphs;
    std::vector<int> cells;
    for (const auto* s : scenes) {
      if (s->objects.empty() || s->objects.size() > static_cast<std::size_t>(glyph::kMaxObjects))
        throw Error("forward: scene '" + s->scene_id + "' must have 1 to 8 objects");
      out.counts.push_back(static_cast<int>(s->objects.size()));
      for (const auto& o : s->objects) {
        if (o.class_id < 0 || o.class_id >= num_classes_)
          throw Error("forward: class id " + std::to_string(o.class_id) + " outside [0, " +
                      std::to_string(num_classes_) + ")");
        objects.push_back(&o);
        out.classes.push_back(o.class_id);
        out.boxes.push_back(o.bbox);
        cells.push_back(xform::grid_cell(o.bbox));
      }
      graphs.push_back(scenegraph::build_graph(*s));
    }
    out.olr = encoder_.encode(tape, objects, flags_.freeze_olr);
    if (flags_.no_gnn) {
      out.ccr = diff::relu(bridge_(tape, out.olr));
    } else {
      const auto batch = scenegraph::batch_graphs(graphs);
      diff::Var<T> r = batch.edges.empty() ? tape.zeros({0, scenegraph::kRelationDim}) : relations_(tape, batch.edges);
      out.ccr = gnn_(tape, out.olr, r, batch);
    }
    if (flags_.no_transformer) {
      std::vector<std::vector<int>> groups;
      int row = 0;
      for (int c : out.counts) {
        groups.emplace_back();
        for (int k = 0; k < c; ++k) groups.back().push_back(row++);
      }
      out.sr = diff::segment_sum(out.ccr, groups);
      out.fcr = out.ccr;
    } else {
      auto so = xform_(tape, out.ccr, out.counts, cells);
      out.sr = so.sr;
      out.fcr = so.fcr;
    }
    return out;
  }

  // SR of each scene as plain vectors (inference, no gradient).
  std::vector<std::vector<float>> embed(const std::vector<const glyph::Composition*>& scenes) const {
    diff::Tape<T> tape;
    auto f = forward(tape, scenes);
    std::vector<std::vector<float>> out;
    const auto v = f.sr.value();
    for (int s = 0; s < f.sr.rows(); ++s)
      out.emplace_back(v.begin() + static_cast<std::ptrdiff_t>(s) * f.sr.cols(),
                       v.begin() + static_cast<std::ptrdiff_t>(s + 1) * f.sr.cols());
    return out;
  }

  bool has_generators() const { return !flags_.no_generation_losses; }

  const olr::ObjectEncoder<T>& encoder() const { return encoder_; }
  const layout::BoxGenerator<T>& box_generator() const { return require(boxes_); }
  const layout::MaskGenerator<T>& mask_generator() const { return require(masks_); }
  const layout::FcrClassifier<T>& fcr_classifier() const { return require(fcr_classifier_); }
  const layout::MaskDiscriminator<T>& discriminator() const { return require(discriminator_); }

  diff::ParameterSet<T>& params() { return *params_; }
  const diff::ParameterSet<T>& params() const { return *params_; }
  int num_classes() const { return num_classes_; }
  const Ablations& flags() const { return flags_; }

 private:
  template <class M>
  const M& require(const M& m) const {
    if (!has_generators()) throw Error("model was built without generation heads (no_generation_losses)");
    return m;
  }

  int num_classes_;
  Ablations flags_;
  std::unique_ptr<diff::ParameterSet<T>> params_;
  olr::ObjectEncoder<T> encoder_;
  scenegraph::RelationEmbedding<T> relations_;
  gnn::Gnn<T> gnn_;
  diff::Linear<T> bridge_;
  xform::AttentionStack<T> xform_;
  layout::BoxGenerator<T> boxes_;
  layout::MaskGenerator<T> masks_;
  layout::FcrClassifier<T> fcr_classifier_;
  layout::MaskDiscriminator<T> discriminator_;
};

}  // namespace sks::pipeline
