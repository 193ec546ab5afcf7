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

#include "sketchscene/layout/compose.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "sketchscene/common.hpp"

namespace sks::layout {

LayoutRaster compose_layout(const std::vector<glyph::BBox>& boxes, const std::vector<std::vector<float>>& masks,
                            const std::vector<int>& classes, int background_id, int size) {
  if (boxes.size() != masks.size() || boxes.size() != classes.size())
    throw Error("compose_layout: boxes, masks and classes differ in length");
  LayoutRaster out;
  out.width = out.height = size;
  out.ids.assign(static_cast<std::size_t>(size) * size, background_id);
  std::vector<std::size_t> order(boxes.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const float aa = boxes[a].area(), ab = boxes[b].area();
    if (aa != ab) return aa > ab;
    return a > b;
  });
  for (std::size_t idx : order) {
    const auto& box = boxes[idx];
    const auto& mask = masks[idx];
    if (mask.size() != static_cast<std::size_t>(glyph::kCropPixels)) throw Error("compose_layout: mask must be 32x32");
    const float w = box.width(), h = box.height();
    if (!(w > 0 && h > 0)) continue;
    for (int py = 0; py < size; ++py) {
      const float y = (static_cast<float>(py) + 0.5f) / static_cast<float>(size);
      if (y < box.y0 || y >= box.y1) continue;
      const int my = std::clamp(static_cast<int>((y - box.y0) / h * glyph::kCropSize), 0, glyph::kCropSize - 1);
      for (int px = 0; px < size; ++px) {
        const float x = (static_cast<float>(px) + 0.5f) / static_cast<float>(size);
        if (x < box.x0 || x >= box.x1) continue;
        const int mx = std::clamp(static_cast<int>((x - box.x0) / w * glyph::kCropSize), 0, glyph::kCropSize - 1);
        if (mask[static_cast<std::size_t>(my) * glyph::kCropSize + mx] >= 0.5f)
          out.ids[static_cast<std::size_t>(py) * size + px] = classes[idx];
      }
    }
  }
  return out;
}

LayoutRaster ground_truth_layout(const glyph::Composition& comp, int num_classes) {
  std::vector<glyph::BBox> boxes;
  std::vector<std::vector<float>> masks;
  std::vector<int> classes;
  for (const auto& o : comp.objects) {
    boxes.push_back(o.bbox);
    masks.push_back(o.mask);
    classes.push_back(o.class_id);
  }
  return compose_layout(boxes, masks, classes, num_classes + comp.background.value_or(0));
}

double pixel_accuracy(const LayoutRaster& a, const LayoutRaster& b) {
  if (a.ids.size() != b.ids.size()) throw Error("pixel_accuracy: layout sizes differ");
  std::size_t same = 0;
  for (std::size_t i = 0; i < a.ids.size(); ++i) same += a.ids[i] == b.ids[i];
  return static_cast<double>(same) / static_cast<double>(a.ids.size());
}

// Each channel encodes two bits of the id, so distinct ids give distinct colors.
Rgb palette_color(int id) {
  if (id < 0 || id >= kPaletteSize) throw Error("palette: id " + std::to_string(id) + " outside [0, 64)");
  auto level = [](int bits) { return static_cast<std::uint8_t>(32 + 64 * bits); };
  return {level(id % 4), level((id / 4) % 4), level((id / 16) % 4)};
}

int palette_lookup(Rgb c) {
  auto bits = [](std::uint8_t v) { return (v >= 32 && (v - 32) % 64 == 0) ? (v - 32) / 64 : -1; };
  const int r = bits(c.r), g = bits(c.g), b = bits(c.b);
  if (r < 0 || g < 0 || b < 0) return -1;
  return r + 4 * g + 16 * b;
}

RgbImage colorize(const LayoutRaster& layout, int num_ids) {
  if (num_ids > kPaletteSize) throw Error("colorize: palette holds at most 64 ids");
  RgbImage img{layout.width, layout.height, {}};
  img.pixels.reserve(layout.ids.size() * 3);
  for (int id : layout.ids) {
    if (id < 0 || id >= num_ids) throw Error("colorize: unknown class id " + std::to_string(id));
    const Rgb c = palette_color(id);
    img.pixels.insert(img.pixels.end(), {c.r, c.g, c.b});
  }
  return img;
}

LayoutRaster decolorize(const RgbImage& image) {
  LayoutRaster out;
  out.width = image.width;
  out.height = image.height;
  out.ids.reserve(static_cast<std::size_t>(image.width) * image.height);
  for (std::size_t i = 0; i + 2 < image.pixels.size(); i += 3) {
    const int id = palette_lookup({image.pixels[i], image.pixels[i + 1], image.pixels[i + 2]});
    if (id < 0) throw Error("decolorize: color not in palette");
    out.ids.push_back(id);
  }
  return out;
}

GrayImage layout_to_gray(const LayoutRaster& layout) {
  GrayImage img{layout.width, layout.height, {}};
  for (int id : layout.ids) {
    if (id < 0 || id > 255) throw Error("layout_to_gray: id out of byte range");
    img.pixels.push_back(static_cast<std::uint8_t>(id));
  }
  return img;
}

}  // namespace sks::layout
