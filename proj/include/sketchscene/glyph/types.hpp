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

#pragma once

#include <optional>
#include <string>
#include <vector>

namespace sks::glyph {

inline constexpr int kCropSize = 32;
inline constexpr int kCropPixels = kCropSize * kCropSize;
inline constexpr int kMaxObjects = 8;

enum class Domain { kSketch, kPhoto };
enum class Split { kTrain, kVal, kTest };

// How a composition relates to its photo source.
enum class SceneKind { kPhoto, kSoftSketch, kHardSketch, kSwapNegative };

std::string to_string(Domain d);
std::string to_string(Split s);
std::string to_string(SceneKind k);
Domain parse_domain(const std::string& s);
Split parse_split(const std::string& s);
SceneKind parse_scene_kind(const std::string& s);

// Axis-aligned box in normalized scene coordinates, y pointing down.
struct BBox {
  float x0 = 0, y0 = 0, x1 = 0, y1 = 0;

  float width() const { return x1 - x0; }
  float height() const { return y1 - y0; }
  float area() const { return width() * height(); }
  float cx() const { return 0.5f * (x0 + x1); }
  float cy() const { return 0.5f * (y0 + y1); }
  bool well_ordered() const { return x0 < x1 && y0 < y1; }
  bool inside_unit() const { return x0 >= 0 && y0 >= 0 && x1 <= 1 && y1 <= 1; }
  bool operator==(const BBox&) const = default;
};

struct GlyphClass {
  int class_id = 0;
  std::string name;
  std::string family;
};

// One object of a composition. Raster and mask are kCropSize^2 row-major,
// in the object's own box-normalized frame.
struct ObjectInstance {
  int class_id = 0;
  Domain domain = Domain::kPhoto;
  std::vector<float> raster;  // values in [0, 1]
  std::vector<float> mask;    // 0 or 1
  BBox bbox;
};

struct Composition {
  std::string scene_id;
  std::vector<ObjectInstance> objects;
  std::optional<int> background;  // index into the background vocabulary
  Split split = Split::kTrain;
  SceneKind kind = SceneKind::kPhoto;
  std::string paired_scene_id;  // photo source for sketch scenes; empty for photos
};

// Sorts objects by box area descending, ties by x0 ascending.
void canonicalize(Composition& comp);
bool is_canonical(const Composition& comp);

// Throws sks::Error naming the scene when an invariant does not hold.
void validate(const Composition& comp);

}  // namespace sks::glyph
