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

// Semantic layout assembly and the flat colorizer.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sketchscene/glyph/types.hpp"
#include "sketchscene/image_io.hpp"

namespace sks::layout {

inline constexpr int kLayoutSize = 64;

// Class-id raster. Object classes are [0, C); background b is stored as C + b.
struct LayoutRaster {
  int width = kLayoutSize;
  int height = kLayoutSize;
  std::vector<int> ids;

  int at(int x, int y) const { return ids[static_cast<std::size_t>(y) * width + x]; }
  bool operator==(const LayoutRaster&) const = default;
};

// Paints masks (thresholded at 0.5, nearest-neighbor scaled) into their boxes
// onto a background-filled raster. Larger boxes are painted first, so
// smaller objects end up in front; at equal area the lower index is in front.
LayoutRaster compose_layout(const std::vector<glyph::BBox>& boxes, const std::vector<std::vector<float>>& masks,
                            const std::vector<int>& classes, int background_id, int size = kLayoutSize);

// Ground-truth layout of a composition (background defaults to index 0).
LayoutRaster ground_truth_layout(const glyph::Composition& comp, int num_classes);

// Fraction of cells with equal ids.
double pixel_accuracy(const LayoutRaster& a, const LayoutRaster& b);

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
  bool operator==(const Rgb&) const = default;
};

// Class palette; injective over [0, 64).
inline constexpr int kPaletteSize = 64;
Rgb palette_color(int id);
int palette_lookup(Rgb color);  // -1 when the color is not in the palette

// Throws for ids outside [0, num_ids).
RgbImage colorize(const LayoutRaster& layout, int num_ids);
LayoutRaster decolorize(const RgbImage& image);

// Class ids stored directly as gray levels.
GrayImage layout_to_gray(const LayoutRaster& layout);

}  // namespace sks::layout
