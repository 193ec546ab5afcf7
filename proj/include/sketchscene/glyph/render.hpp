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

// Procedural glyph shapes and their two renderings: filled and shaded
// (photo domain) or a thin jittered outline (sketch domain).

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sketchscene/common.hpp"
#include "sketchscene/glyph/types.hpp"

namespace sks::glyph {

struct Point {
  double x = 0, y = 0;
};

struct Polygon {
  std::vector<Point> points;
  bool hole = false;
};

// Outline of one glyph instance in its crop frame [0,1]^2.
struct Shape {
  std::vector<Polygon> polygons;
};

// Shape families, by stable index. The first C are the dataset classes.
const std::vector<std::string>& family_names();
int family_count();

// Deterministic geometry for family `family` drawn from `geometry_seed`.
Shape make_shape(int family, std::uint64_t geometry_seed);

struct RenderedCrop {
  std::vector<float> raster;
  std::vector<float> mask;
};

// Filled rendering with a linear shading gradient drawn from shade_seed.
RenderedCrop render_photo(const Shape& shape, std::uint64_t shade_seed);

// 1-px outline with vertex jitter and stroke dropout drawn from stroke_seed.
// The mask is the fill of the jittered outline.
RenderedCrop render_sketch(const Shape& shape, std::uint64_t stroke_seed);

// Pixel-center coverage; used for masks.
std::vector<float> fill_mask(const Shape& shape);

// Quantizes to the 8-bit grid used on disk so in-memory and loaded data agree.
void quantize(std::vector<float>& raster);

float mask_iou(const std::vector<float>& a, const std::vector<float>& b, float threshold = 0.5f);

// size x size thumbnail of a composition. Crops are nearest-neighbor scaled
// into their boxes, larger boxes first; photo crops overwrite the canvas
// inside their mask, sketch strokes are max-composited.
std::vector<float> render_scene(const Composition& comp, int size);

}  // namespace sks::glyph
