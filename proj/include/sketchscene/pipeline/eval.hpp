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

// Inference helpers (embedding, indexing, layout synthesis) and the
// evaluation harness behind `eval --task`.

#pragma once

#include <string>
#include <vector>

#include "json.hpp"
#include "sketchscene/glyph/dataset.hpp"
#include "sketchscene/layout/compose.hpp"
#include "sketchscene/pipeline/train.hpp"
#include "sketchscene/retrieval/index.hpp"

namespace sks::pipeline {

// SR per scene, one forward pass each.
std::vector<std::vector<float>> embed_scenes(const Model& model, const std::vector<const glyph::Composition*>& scenes);

retrieval::EmbeddingIndex build_index(const Model& model, const std::vector<const glyph::Composition*>& corpus);

// Query with floor(n/2) (at least one when n > 1) sketched objects replaced
// by the paired photo crops at the same positions.
glyph::Composition mixed_domain_query(const glyph::Composition& sketch, const glyph::Composition& photo, Rng& rng);

struct Synthesis {
  std::vector<glyph::BBox> boxes;
  std::vector<std::vector<float>> masks;  // 32x32 probabilities
  layout::LayoutRaster layout;
};

// Boxes and masks from the FCR of `scene`, composed onto `background`
// (default: the scene's own background, else 0).
Synthesis synthesize(const Model& model, const glyph::Composition& scene, std::optional<int> background = {});

double mask_iou(const std::vector<float>& predicted, const std::vector<float>& truth);

// ---- object level (stage 1) ----

struct ObjectReport {
  double recall_at_1 = 0;  // sketch query -> nearest photo crop has the same class
  double intra_class_distance = 0;
  double inter_class_distance = 0;
  int queries = 0;
  int gallery = 0;
  nlohmann::json to_json() const;
};

ObjectReport evaluate_objects(const Model& model, const glyph::Dataset& data, glyph::Split split);

// ---- scene retrieval ----

struct RetrievalEval {
  retrieval::RetrievalReport sketch;      // soft-paired sketch queries
  retrieval::RetrievalReport mixed;       // same queries, half photo crops
  retrieval::RetrievalReport hard;        // hard-paired sketch queries
  retrieval::RetrievalReport photo_self;  // corpus photos querying themselves
  int corpus = 0;
  nlohmann::json to_json() const;
};

RetrievalEval evaluate_retrieval_task(const Model& model, const glyph::Dataset& data, glyph::Split split,
                                      std::uint64_t seed = 0);

// ---- generation ----

struct GenerationScene {
  std::string scene_id;
  glyph::Domain domain = glyph::Domain::kSketch;
  double box_giou = 0;
  double mask_iou = 0;
  double pixel_accuracy = 0;
};

struct GenerationEval {
  double box_giou = 0;  // means over test scenes, sketch-derived FCR
  double mask_iou = 0;
  double pixel_accuracy = 0;
  double photo_box_giou = 0;  // same from photo-derived FCR
  double photo_mask_iou = 0;
  double photo_pixel_accuracy = 0;
  double ground_truth_pixel_accuracy = 0;  // colorize -> decolorize of GT layouts
  std::vector<GenerationScene> scenes;
  nlohmann::json to_json() const;
};

GenerationEval evaluate_generation(const Model& model, const glyph::Dataset& data, glyph::Split split);

}  // namespace sks::pipeline
