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

#include "sketchscene/glyph/render.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace sks::glyph {

namespace {

Polygon ellipse(double cx, double cy, double rx, double ry, int n, double phase = 0.0) {
  Polygon p;
  for (int i = 0; i < n; ++i) {
    const double t = phase + 2.0 * M_PI * i / n;
    p.points.push_back({cx + rx * std::cos(t), cy + ry * std::sin(t)});
  }
  return p;
}

Polygon rect(double x0, double y0, double x1, double y1) {
  return Polygon{{{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}}, false};
}

// Small rotation about the crop center plus optional mirror.
void pose(Shape& s, double angle, bool mirror) {
  const double c = std::cos(angle), sn = std::sin(angle);
  for (auto& poly : s.polygons)
    for (auto& p : poly.points) {
      double x = p.x - 0.5, y = p.y - 0.5;
      if (mirror) x = -x;
      p = {0.5 + c * x - sn * y, 0.5 + sn * x + c * y};
    }
}

bool inside_polygon(const Polygon& poly, double x, double y) {
  bool in = false;
  const auto& pts = poly.points;
  for (std::size_t i = 0, j = pts.size() - 1; i < pts.size(); j = i++) {
    if ((pts[i].y > y) != (pts[j].y > y)) {
      const double xc = pts[j].x + (y - pts[j].y) * (pts[i].x - pts[j].x) / (pts[i].y - pts[j].y);
      if (x < xc) in = !in;
    }
  }
  return in;
}

bool inside_shape(const Shape& s, double x, double y) {
  bool solid = false;
  for (const auto& poly : s.polygons)
    if (!poly.hole && inside_polygon(poly, x, y)) {
      solid = true;
      break;
    }
  if (!solid) return false;
  for (const auto& poly : s.polygons)
    if (poly.hole && inside_polygon(poly, x, y)) return false;
  return true;
}

void draw_line(std::vector<float>& raster, Point a, Point b) {
  const double ax = a.x * kCropSize, ay = a.y * kCropSize;
  const double bx = b.x * kCropSize, by = b.y * kCropSize;
  const int steps = std::max(1, static_cast<int>(std::ceil(std::max(std::abs(bx - ax), std::abs(by - ay)) * 2.0)));
  for (int i = 0; i <= steps; ++i) {
    const double t = static_cast<double>(i) / steps;
    const int px = static_cast<int>(std::floor(ax + t * (bx - ax)));
    const int py = static_cast<int>(std::floor(ay + t * (by - ay)));
    if (px < 0 || py < 0 || px >= kCropSize || py >= kCropSize) continue;
    raster[static_cast<std::size_t>(py) * kCropSize + px] = 1.0f;
  }
}

}  // namespace

const std::vector<std::string>& family_names() {
  static const std::vector<std::string> names = {"circle", "triangle", "house",   "tree",    "star", "cross",
                                                 "arrow",  "ring",     "diamond", "hexagon", "moon", "heart"};
  return names;
}

int family_count() { return static_cast<int>(family_names().size()); }

Shape make_shape(int family, std::uint64_t geometry_seed) {
  Rng rng(geometry_seed * 0x2545f4914f6cdd1dULL + static_cast<std::uint64_t>(family) + 1);
  Shape s;
  const double m = rng.uniform(0.06, 0.12);  // margin to the crop border
  switch (family) {
    case 0: {  // circle
      s.polygons.push_back(ellipse(0.5, 0.5, 0.5 - m, rng.uniform(0.85, 1.0) * (0.5 - m), 28));
      break;
    }
    case 1: {  // triangle
      const double apex = rng.uniform(0.35, 0.65);
      s.polygons.push_back(Polygon{{{apex, m}, {1 - m, 1 - m}, {m, 1 - m}}, false});
      break;
    }
    case 2: {  // house: body plus roof as one outline
      const double roof = rng.uniform(0.35, 0.5);
      const double inset = rng.uniform(0.1, 0.18);
      s.polygons.push_back(Polygon{{{0.5, m},
                                    {1 - m, roof},
                                    {1 - m - inset, roof},
                                    {1 - m - inset, 1 - m},
                                    {m + inset, 1 - m},
                                    {m + inset, roof},
                                    {m, roof}},
                                   false});
      break;
    }
    case 3: {  // tree: round crown on a trunk
      const double trunk = rng.uniform(0.08, 0.14);
      const double crown_r = rng.uniform(0.28, 0.36);
      s.polygons.push_back(ellipse(0.5, m + crown_r, crown_r, crown_r, 24));
      s.polygons.push_back(rect(0.5 - trunk, m + 1.6 * crown_r, 0.5 + trunk, 1 - m));
      break;
    }
    case 4: {  // five-point star
      const double inner = rng.uniform(0.38, 0.5);
      Polygon p;
      const double r = 0.5 - m;
      for (int i = 0; i < 10; ++i) {
        const double t = -M_PI / 2 + M_PI * i / 5;
        const double rr = (i % 2 == 0) ? r : r * inner;
        p.points.push_back({0.5 + rr * std::cos(t), 0.52 + rr * std::sin(t)});
      }
      s.polygons.push_back(p);
      break;
    }
    case 5: {  // cross
      const double arm = rng.uniform(0.12, 0.18);
      const double lo = m, hi = 1 - m;
      const double a = 0.5 - arm, b = 0.5 + arm;
      s.polygons.push_back(Polygon{
          {{a, lo}, {b, lo}, {b, a}, {hi, a}, {hi, b}, {b, b}, {b, hi}, {a, hi}, {a, b}, {lo, b}, {lo, a}, {a, a}},
          false});
      break;
    }
    case 6: {  // arrow pointing right
      const double shaft = rng.uniform(0.1, 0.16);
      const double head = rng.uniform(0.5, 0.62);
      const double lo = m, hi = 1 - m;
      s.polygons.push_back(Polygon{{{lo, 0.5 - shaft},
                                    {head, 0.5 - shaft},
                                    {head, lo + 0.06},
                                    {hi, 0.5},
                                    {head, hi - 0.06},
                                    {head, 0.5 + shaft},
                                    {lo, 0.5 + shaft}},
                                   false});
      break;
    }
    case 7: {  // ring
      const double r = 0.5 - m;
      const double inner = rng.uniform(0.45, 0.6);
      s.polygons.push_back(ellipse(0.5, 0.5, r, r, 28));
      Polygon h = ellipse(0.5, 0.5, r * inner, r * inner, 28);
      h.hole = true;
      s.polygons.push_back(h);
      break;
    }
    case 8: {  // diamond
      const double squeeze = rng.uniform(0.0, 0.1);
      s.polygons.push_back(Polygon{{{0.5, m}, {1 - m - squeeze, 0.5}, {0.5, 1 - m}, {m + squeeze, 0.5}}, false});
      break;
    }
    case 9: {  // hexagon
      s.polygons.push_back(ellipse(0.5, 0.5, 0.5 - m, 0.5 - m, 6, rng.uniform(0.0, 0.3)));
      break;
    }
    case 10: {  // crescent moon
      const double r = 0.5 - m;
      s.polygons.push_back(ellipse(0.5, 0.5, r, r, 28));
      Polygon h = ellipse(0.5 + rng.uniform(0.35, 0.5) * r, 0.45, r * 0.8, r * 0.8, 28);
      h.hole = true;
      s.polygons.push_back(h);
      break;
    }
    case 11: {  // heart
      Polygon p;
      for (int i = 0; i < 32; ++i) {
        const double t = 2.0 * M_PI * i / 32;
        const double x = 16 * std::pow(std::sin(t), 3);
        const double y = 13 * std::cos(t) - 5 * std::cos(2 * t) - 2 * std::cos(3 * t) - std::cos(4 * t);
        p.points.push_back({0.5 + x / 34.0 * (1 - 2 * m), 0.47 - y / 34.0 * (1 - 2 * m)});
      }
      s.polygons.push_back(p);
      break;
    }
    default:
      throw Error("make_shape: unknown family " + std::to_string(family));
  }
  const bool mirror = (family == 6 || family == 10 || family == 1) && rng.bernoulli(0.5);
  pose(s, rng.uniform(-0.12, 0.12), mirror);
  return s;
}

std::vector<float> fill_mask(const Shape& shape) {
  std::vector<float> mask(kCropPixels, 0.0f);
  for (int y = 0; y < kCropSize; ++y)
    for (int x = 0; x < kCropSize; ++x)
      if (inside_shape(shape, (x + 0.5) / kCropSize, (y + 0.5) / kCropSize))
        mask[static_cast<std::size_t>(y) * kCropSize + x] = 1.0f;
  return mask;
}

void quantize(std::vector<float>& raster) {
  for (auto& v : raster) v = std::round(std::clamp(v, 0.0f, 1.0f) * 255.0f) / 255.0f;
}

RenderedCrop render_photo(const Shape& shape, std::uint64_t shade_seed) {
  Rng rng(shade_seed ^ 0x51afd7ed558ccd17ULL);
  const double angle = rng.uniform(0.0, 2.0 * M_PI);
  const double dx = std::cos(angle), dy = std::sin(angle);
  const double base = rng.uniform(0.55, 0.8);
  const double slope = rng.uniform(0.25, 0.45);
  RenderedCrop out;
  out.mask = fill_mask(shape);
  out.raster.assign(kCropPixels, 0.0f);
  for (int y = 0; y < kCropSize; ++y)
    for (int x = 0; x < kCropSize; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * kCropSize + x;
      if (out.mask[i] == 0.0f) continue;
      const double u = (x + 0.5) / kCropSize - 0.5, v = (y + 0.5) / kCropSize - 0.5;
      out.raster[i] = static_cast<float>(std::clamp(base + slope * (dx * u + dy * v), 0.2, 1.0));
    }
  quantize(out.raster);
  return out;
}

RenderedCrop render_sketch(const Shape& shape, std::uint64_t stroke_seed) {
  Rng rng(stroke_seed ^ 0x94d049bb133111ebULL);
  Shape jittered = shape;
  for (auto& poly : jittered.polygons)
    for (auto& p : poly.points) {
      p.x = std::clamp(p.x + 0.02 * rng.normal(), 0.0, 1.0);
      p.y = std::clamp(p.y + 0.02 * rng.normal(), 0.0, 1.0);
    }
  RenderedCrop out;
  out.raster.assign(kCropPixels, 0.0f);
  for (const auto& poly : jittered.polygons) {
    const std::size_t n = poly.points.size();
    const std::size_t keep = rng.below(static_cast<std::uint64_t>(n));  // one edge always survives
    for (std::size_t i = 0; i < n; ++i) {
      if (i != keep && rng.bernoulli(0.1)) continue;
      draw_line(out.raster, poly.points[i], poly.points[(i + 1) % n]);
    }
  }
  out.mask = fill_mask(jittered);
  if (std::none_of(out.mask.begin(), out.mask.end(), [](float v) { return v > 0; })) out.mask = fill_mask(shape);
  return out;
}

float mask_iou(const std::vector<float>& a, const std::vector<float>& b, float threshold) {
  if (a.size() != b.size()) throw Error("mask_iou: size mismatch");
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const bool pa = a[i] >= threshold, pb = b[i] >= threshold;
    inter += (pa && pb);
    uni += (pa || pb);
  }
  return uni == 0 ? 1.0f : static_cast<float>(inter) / static_cast<float>(uni);
}

std::vector<float> render_scene(const Composition& comp, int size) {
  if (size < 1) throw Error("render_scene: size must be positive");
  std::vector<std::size_t> order(comp.objects.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return comp.objects[a].bbox.area() > comp.objects[b].bbox.area(); });
  std::vector<float> canvas(static_cast<std::size_t>(size) * size, 0.0f);
  for (std::size_t idx : order) {
    const ObjectInstance& o = comp.objects[idx];
    for (int y = 0; y < size; ++y)
      for (int x = 0; x < size; ++x) {
        const float u = (x + 0.5f) / size, v = (y + 0.5f) / size;
        if (u < o.bbox.x0 || u >= o.bbox.x1 || v < o.bbox.y0 || v >= o.bbox.y1) continue;
        const int cx = std::min(kCropSize - 1, static_cast<int>((u - o.bbox.x0) / o.bbox.width() * kCropSize));
        const int cy = std::min(kCropSize - 1, static_cast<int>((v - o.bbox.y0) / o.bbox.height() * kCropSize));
        const std::size_t c = static_cast<std::size_t>(cy) * kCropSize + cx;
        float& px = canvas[static_cast<std::size_t>(y) * size + x];
        if (o.domain == Domain::kPhoto) {
          if (o.mask.empty() || o.mask[c] >= 0.5f) px = o.raster[c];
        } else {
          px = std::max(px, o.raster[c]);
        }
      }
  }
  return canvas;
}

}  // namespace sks::glyph
