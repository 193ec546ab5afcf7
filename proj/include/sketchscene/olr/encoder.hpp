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

// Object-level encoder: separate sketch and photo branches feeding a shared
// head, plus the object classifier used by the cross-entropy term.

#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "sketchscene/diff/layers.hpp"
#include "sketchscene/glyph/types.hpp"

namespace sks::olr {

inline constexpr int kEmbedDim = 128;
inline constexpr double kTripletMargin = 0.5;

template <class T>
class ObjectEncoder {
 public:
  ObjectEncoder() = default;
  ObjectEncoder(diff::ParameterSet<T>& params, int num_classes, Rng& rng)
      : sketch_(params, "olr.fs", {glyph::kCropPixels, 256, kEmbedDim}, diff::Activation::kLeakyRelu,
                diff::Activation::kLeakyRelu, rng),
        photo_(params, "olr.fi", {glyph::kCropPixels, 256, kEmbedDim}, diff::Activation::kLeakyRelu,
               diff::Activation::kLeakyRelu, rng),
        head_(params, "olr.head", {kEmbedDim, kEmbedDim, kEmbedDim}, diff::Activation::kLeakyRelu,
              diff::Activation::kNone, rng),
        classifier_(params, "olr.fe", kEmbedDim, num_classes, rng),
        num_classes_(num_classes) {}

  // Embeds rows of `rasters` [n, 1024]; row r goes through the sketch branch
  // when domains[r] is kSketch, the photo branch otherwise.
  diff::Var<T> encode(diff::Tape<T>& tape, const std::vector<T>& rasters, const std::vector<glyph::Domain>& domains,
                      bool freeze = false) const {
    const int n = static_cast<int>(domains.size());
    if (n == 0) throw Error("encode: no objects");
    if (rasters.size() != static_cast<std::size_t>(n) * glyph::kCropPixels)
      throw diff::ShapeError("op 'encode_object': expected " + std::to_string(n) + " rasters of 32x32 (" +
                             std::to_string(n * glyph::kCropPixels) + " values), got " +
                             std::to_string(rasters.size()));
    std::vector<int> sketch_rows, photo_rows;
    for (int r = 0; r < n; ++r) (domains[r] == glyph::Domain::kSketch ? sketch_rows : photo_rows).push_back(r);
    auto take = [&](const std::vector<int>& rows) {
      std::vector<T> v;
      v.reserve(rows.size() * glyph::kCropPixels);
      for (int r : rows)
        v.insert(v.end(), rasters.begin() + static_cast<std::ptrdiff_t>(r) * glyph::kCropPixels,
                 rasters.begin() + static_cast<std::ptrdiff_t>(r + 1) * glyph::kCropPixels);
      return tape.constant({static_cast<int>(rows.size()), glyph::kCropPixels}, std::move(v));
    };
    std::vector<diff::Var<T>> parts;
    if (!sketch_rows.empty()) parts.push_back(sketch_(tape, take(sketch_rows), freeze));
    if (!photo_rows.empty()) parts.push_back(photo_(tape, take(photo_rows), freeze));
    diff::Var<T> branch = parts.size() == 1 ? parts[0] : diff::concat(parts, 0);
    if (!sketch_rows.empty() && !photo_rows.empty()) {
      // Undo the grouping so output row r belongs to input row r.
      std::vector<int> order(static_cast<std::size_t>(n));
      for (std::size_t i = 0; i < sketch_rows.size(); ++i) order[static_cast<std::size_t>(sketch_rows[i])] = static_cast<int>(i);
      for (std::size_t i = 0; i < photo_rows.size(); ++i)
        order[static_cast<std::size_t>(photo_rows[i])] = static_cast<int>(sketch_rows.size() + i);
      branch = diff::gather_rows(branch, order);
    }
    return head_(tape, branch, freeze);
  }

  diff::Var<T> encode(diff::Tape<T>& tape, const std::vector<const glyph::ObjectInstance*>& objects,
                      bool freeze = false) const {
    std::vector<T> rasters;
    std::vector<glyph::Domain> domains;
    rasters.reserve(objects.size() * glyph::kCropPixels);
    for (const auto* o : objects) {
      if (o->raster.size() != static_cast<std::size_t>(glyph::kCropPixels))
        throw diff::ShapeError("op 'encode_object': raster must be 32x32, got " + std::to_string(o->raster.size()) +
                               " values");
      rasters.insert(rasters.end(), o->raster.begin(), o->raster.end());
      domains.push_back(o->domain);
    }
    return encode(tape, rasters, domains, freeze);
  }

  // f_e logits [n, C].
  diff::Var<T> classify(diff::Tape<T>& tape, diff::Var<T> embedding, bool freeze = false) const {
    return classifier_(tape, embedding, freeze);
  }

  int num_classes() const { return num_classes_; }

 private:
  diff::Mlp<T> sketch_;
  diff::Mlp<T> photo_;
  diff::Mlp<T> head_;
  diff::Linear<T> classifier_;
  int num_classes_ = 0;
};

// max(0, m + d(a,p) - d(a,n)) on plain distances.
inline double triplet_from_distances(double d_ap, double d_an, double margin = kTripletMargin) {
  return std::max(0.0, margin + d_ap - d_an);
}

// Mean over rows of the triplet hinge on L2 distances.
template <class T>
diff::Var<T> triplet_loss(diff::Var<T> a, diff::Var<T> p, diff::Var<T> n, T margin = T(kTripletMargin)) {
  auto hinge = diff::relu(diff::add_scalar(diff::sub(diff::l2_distance(a, p), diff::l2_distance(a, n)), margin));
  return diff::mean(hinge);
}

// Sum over {a, p, n} of the classifier cross-entropy, averaged over rows.
template <class T>
diff::Var<T> cce_loss(diff::Tape<T>& tape, const ObjectEncoder<T>& enc, diff::Var<T> a, diff::Var<T> p,
                      diff::Var<T> n, const std::vector<int>& labels_a, const std::vector<int>& labels_p,
                      const std::vector<int>& labels_n, bool freeze = false) {
  auto term = [&](diff::Var<T> x, const std::vector<int>& y) {
    for (int c : y)
      if (c < 0 || c >= enc.num_classes())
        throw Error("cce_loss: label " + std::to_string(c) + " outside [0, " + std::to_string(enc.num_classes()) + ")");
    return diff::mean(diff::cross_entropy_logits(enc.classify(tape, x, freeze), y));
  };
  return diff::add_all<T>({term(a, labels_a), term(p, labels_p), term(n, labels_n)});
}

}  // namespace sks::olr
