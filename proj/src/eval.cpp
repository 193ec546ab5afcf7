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

#include "sketchscene/pipeline/eval.hpp"

#include <algorithm>
#include <cmath>

#include "sketchscene/layout/generators.hpp"

namespace sks::pipeline {

using glyph::Composition;
using glyph::Domain;
using glyph::SceneKind;
using glyph::Split;

namespace {

nlohmann::json report_json(const retrieval::RetrievalReport& r) {
  nlohmann::json j;
  for (const auto& [k, v] : r.recall) j["recall@" + std::to_string(k)] = v;
  for (const auto& [k, v] : r.precision) j["precision@" + std::to_string(k)] = v;
  j["evaluated"] = r.evaluated;
  j["excluded"] = r.excluded;
  return j;
}

retrieval::ClassTable class_table(const std::vector<const Composition*>& scenes) {
  retrieval::ClassTable t;
  for (const auto* s : scenes) {
    std::vector<int> c;
    for (const auto& o : s->objects) c.push_back(o.class_id);
    t[s->scene_id] = c;
  }
  return t;
}

std::vector<retrieval::Query> make_queries(const Model& model, const std::vector<const Composition*>& scenes) {
  const auto emb = embed_scenes(model, scenes);
  std::vector<retrieval::Query> q;
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    const Composition& s = *scenes[i];
    std::vector<int> classes;
    for (const auto& o : s.objects) classes.push_back(o.class_id);
    q.push_back({s.scene_id, emb[i], s.kind == SceneKind::kPhoto ? s.scene_id : s.paired_scene_id, classes});
  }
  return q;
}

}  // namespace

std::vector<std::vector<float>> embed_scenes(const Model& model, const std::vector<const Composition*>& scenes) {
  // One scene per pass: GEMM rounding depends on the row count, and an index
  // vector must equal the embedding of the same scene sent as a lone query.
  std::vector<std::vector<float>> out;
  out.reserve(scenes.size());
  for (const auto* s : scenes) out.push_back(std::move(model.embed({s})[0]));
  return out;
}

retrieval::EmbeddingIndex build_index(const Model& model, const std::vector<const Composition*>& corpus) {
  if (corpus.empty()) throw Error("build_index: empty corpus");
  const auto emb = embed_scenes(model, corpus);
  retrieval::EmbeddingIndex index(xform::kDim);
  for (std::size_t i = 0; i < corpus.size(); ++i) index.add(corpus[i]->scene_id, emb[i]);
  return index;
}

Composition mixed_domain_query(const Composition& sketch, const Composition& photo, Rng& rng) {
  if (sketch.objects.size() != photo.objects.size())
    throw Error("mixed_domain_query: '" + sketch.scene_id + "' and '" + photo.scene_id + "' differ in object count");
  Composition q = sketch;
  q.scene_id = sketch.scene_id + "_mixed";
  const int n = static_cast<int>(q.objects.size());
  const int swaps = n > 1 ? n / 2 : 0;
  std::vector<int> order(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  shuffle(order, rng);
  for (int k = 0; k < swaps; ++k) q.objects[static_cast<std::size_t>(order[static_cast<std::size_t>(k)])] =
      photo.objects[static_cast<std::size_t>(order[static_cast<std::size_t>(k)])];
  return q;
}

Synthesis synthesize(const Model& model, const Composition& scene, std::optional<int> background) {
  diff::Tape<float> tape;
  const auto f = model.forward(tape, {&scene});
  const auto boxes = model.box_generator()(tape, f.fcr).value();
  const auto masks = model.mask_generator()(tape, f.fcr).value();
  Synthesis s;
  const int n = static_cast<int>(scene.objects.size());
  for (int i = 0; i < n; ++i) {
    const float* b = boxes.data() + 4 * i;
    s.boxes.push_back({b[0], b[1], b[2], b[3]});
    s.masks.emplace_back(masks.begin() + static_cast<std::ptrdiff_t>(i) * glyph::kCropPixels,
                         masks.begin() + static_cast<std::ptrdiff_t>(i + 1) * glyph::kCropPixels);
  }
  const int bg = background.value_or(scene.background.value_or(0));
  if (bg < 0 || bg >= glyph::kBackgroundCount)
    throw Error("synthesize: background " + std::to_string(bg) + " outside [0, " +
                std::to_string(glyph::kBackgroundCount) + ")");
  s.layout = layout::compose_layout(s.boxes, s.masks, f.classes, model.num_classes() + bg);
  return s;
}

double mask_iou(const std::vector<float>& predicted, const std::vector<float>& truth) {
  if (predicted.size() != truth.size()) throw Error("mask_iou: size mismatch");
  int inter = 0, uni = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const bool p = predicted[i] >= 0.5f, t = truth[i] >= 0.5f;
    inter += p && t;
    uni += p || t;
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / uni;
}

// ---- object level ----------------------------------------------------------

nlohmann::json ObjectReport::to_json() const {
  return {{"recall@1", recall_at_1},
          {"intra_class_distance", intra_class_distance},
          {"inter_class_distance", inter_class_distance},
          {"queries", queries},
          {"gallery", gallery}};
}

ObjectReport evaluate_objects(const Model& model, const glyph::Dataset& data, Split split) {
  std::vector<const glyph::ObjectInstance*> sketches, photos;
  for (const auto* s : data.select(split, SceneKind::kSoftSketch))
    for (const auto& o : s->objects) sketches.push_back(&o);
  for (const auto* s : data.select(split, SceneKind::kPhoto))
    for (const auto& o : s->objects) photos.push_back(&o);
  if (sketches.empty() || photos.empty()) throw Error("evaluate_objects: split has no sketch or photo objects");

  auto encode = [&](const std::vector<const glyph::ObjectInstance*>& objs) {
    std::vector<std::vector<float>> out;
    for (std::size_t i = 0; i < objs.size(); i += 256) {
      diff::Tape<float> tape;
      const std::vector<const glyph::ObjectInstance*> chunk(
          objs.begin() + static_cast<std::ptrdiff_t>(i),
          objs.begin() + static_cast<std::ptrdiff_t>(std::min(objs.size(), i + 256)));
      const auto e = model.encoder().encode(tape, chunk);
      const auto v = e.value();
      for (int r = 0; r < e.rows(); ++r)
        out.emplace_back(v.begin() + static_cast<std::ptrdiff_t>(r) * e.cols(),
                         v.begin() + static_cast<std::ptrdiff_t>(r + 1) * e.cols());
    }
    return out;
  };
  const auto es = encode(sketches), ep = encode(photos);
  auto dist = [](const std::vector<float>& a, const std::vector<float>& b) {
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (static_cast<double>(a[i]) - b[i]) * (static_cast<double>(a[i]) - b[i]);
    return std::sqrt(s);
  };

  ObjectReport r;
  r.queries = static_cast<int>(sketches.size());
  r.gallery = static_cast<int>(photos.size());
  int hits = 0;
  double intra = 0, inter = 0;
  long n_intra = 0, n_inter = 0;
  for (std::size_t i = 0; i < es.size(); ++i) {
    double best = INFINITY;
    int best_class = -1;
    for (std::size_t j = 0; j < ep.size(); ++j) {
      const double d = dist(es[i], ep[j]);
      if (d < best) {
        best = d;
        best_class = photos[j]->class_id;
      }
      if (photos[j]->class_id == sketches[i]->class_id) {
        intra += d;
        ++n_intra;
      } else {
        inter += d;
        ++n_inter;
      }
    }
    hits += best_class == sketches[i]->class_id;
  }
  r.recall_at_1 = static_cast<double>(hits) / static_cast<double>(es.size());
  r.intra_class_distance = n_intra ? intra / static_cast<double>(n_intra) : 0;
  r.inter_class_distance = n_inter ? inter / static_cast<double>(n_inter) : 0;
  return r;
}

// ---- scene retrieval -------------------------------------------------------

nlohmann::json RetrievalEval::to_json() const {
  return {{"corpus", corpus},
          {"sketch", report_json(sketch)},
          {"mixed", report_json(mixed)},
          {"hard", report_json(hard)},
          {"photo_self", report_json(photo_self)}};
}

RetrievalEval evaluate_retrieval_task(const Model& model, const glyph::Dataset& data, Split split,
                                      std::uint64_t seed) {
  const auto photos = data.select(split, SceneKind::kPhoto);
  if (photos.empty()) throw Error("evaluate_retrieval: split '" + glyph::to_string(split) + "' has no photo scenes");
  const auto index = build_index(model, photos);
  const auto classes = class_table(photos);

  const auto soft = data.select(split, SceneKind::kSoftSketch);
  std::vector<Composition> mixed;
  mixed.reserve(soft.size());
  Rng rng(seed ^ 0x3122edULL);
  for (const auto* s : soft) mixed.push_back(mixed_domain_query(*s, data.scene(s->paired_scene_id), rng));
  std::vector<const Composition*> mixed_ptrs;
  for (const auto& m : mixed) mixed_ptrs.push_back(&m);

  RetrievalEval r;
  r.corpus = static_cast<int>(index.size());
  r.sketch = retrieval::evaluate_retrieval(index, make_queries(model, soft), {1, 5, 10}, classes);
  r.mixed = retrieval::evaluate_retrieval(index, make_queries(model, mixed_ptrs), {1, 5, 10}, classes);
  r.hard = retrieval::evaluate_retrieval(index, make_queries(model, data.select(split, SceneKind::kHardSketch)),
                                         {1, 5, 10}, classes);
  r.photo_self = retrieval::evaluate_retrieval(index, make_queries(model, photos), {1, 5, 10}, classes);
  return r;
}

// ---- generation ------------------------------------------------------------

nlohmann::json GenerationEval::to_json() const {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& s : scenes)
    rows.push_back({{"scene_id", s.scene_id},
                    {"domain", glyph::to_string(s.domain)},
                    {"box_giou", s.box_giou},
                    {"mask_iou", s.mask_iou},
                    {"pixel_accuracy", s.pixel_accuracy}});
  return {{"box_giou", box_giou},
          {"mask_iou", mask_iou},
          {"pixel_accuracy", pixel_accuracy},
          {"photo_box_giou", photo_box_giou},
          {"photo_mask_iou", photo_mask_iou},
          {"photo_pixel_accuracy", photo_pixel_accuracy},
          {"ground_truth_pixel_accuracy", ground_truth_pixel_accuracy},
          {"scenes", rows}};
}

GenerationEval evaluate_generation(const Model& model, const glyph::Dataset& data, Split split) {
  const auto photos = data.select(split, SceneKind::kPhoto);
  if (photos.empty()) throw Error("evaluate_generation: split '" + glyph::to_string(split) + "' has no photo scenes");
  const int C = model.num_classes();
  GenerationEval g;
  double gt_acc = 0;
  for (const auto* photo : photos) {
    const auto truth = layout::ground_truth_layout(*photo, C);
    const auto decoded = layout::decolorize(layout::colorize(truth, C + glyph::kBackgroundCount));
    gt_acc += layout::pixel_accuracy(truth, decoded);

    const auto sketches = data.sketches_of(photo->scene_id, SceneKind::kSoftSketch);
    std::vector<const Composition*> sources;
    if (!sketches.empty()) sources.push_back(sketches.front());
    sources.push_back(photo);
    for (const auto* src : sources) {
      const Synthesis s = synthesize(model, *src, photo->background);
      GenerationScene row;
      row.scene_id = src->scene_id;
      row.domain = src->kind == SceneKind::kPhoto ? Domain::kPhoto : Domain::kSketch;
      for (std::size_t i = 0; i < photo->objects.size(); ++i) {
        row.box_giou += layout::giou(s.boxes[i], photo->objects[i].bbox);
        row.mask_iou += mask_iou(s.masks[i], photo->objects[i].mask);
      }
      row.box_giou /= static_cast<double>(photo->objects.size());
      row.mask_iou /= static_cast<double>(photo->objects.size());
      row.pixel_accuracy = layout::pixel_accuracy(s.layout, truth);
      g.scenes.push_back(row);
    }
  }
  int ns = 0, np = 0;
  for (const auto& r : g.scenes) {
    if (r.domain == Domain::kSketch) {
      g.box_giou += r.box_giou;
      g.mask_iou += r.mask_iou;
      g.pixel_accuracy += r.pixel_accuracy;
      ++ns;
    } else {
      g.photo_box_giou += r.box_giou;
      g.photo_mask_iou += r.mask_iou;
      g.photo_pixel_accuracy += r.pixel_accuracy;
      ++np;
    }
  }
  if (ns) {
    g.box_giou /= ns;
    g.mask_iou /= ns;
    g.pixel_accuracy /= ns;
  }
  if (np) {
    g.photo_box_giou /= np;
    g.photo_mask_iou /= np;
    g.photo_pixel_accuracy /= np;
  }
  g.ground_truth_pixel_accuracy = gt_acc / static_cast<double>(photos.size());
  return g;
}

}  // namespace sks::pipeline
