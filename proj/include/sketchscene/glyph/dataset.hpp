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

// Synthetic scene corpus: photo-style compositions, soft-paired and
// hard-paired sketch compositions, and class-swapped negatives.

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "sketchscene/common.hpp"
#include "sketchscene/glyph/types.hpp"

namespace sks::glyph {

inline constexpr int kBackgroundCount = 2;

struct DatasetConfig {
  int num_classes = 8;
  int train_scenes = 600;
  int val_scenes = 100;
  int test_scenes = 200;
  int min_objects = 2;
  int max_objects = 5;
  int soft_pairs = 3;           // soft-paired sketch compositions per photo scene
  int sketch_pool_per_class = 60;  // distinct sketch instances per class and split

  // Throws before anything is generated when the config cannot be satisfied.
  void validate() const;
};

class Dataset {
 public:
  std::uint64_t seed = 0;
  DatasetConfig config;
  std::vector<GlyphClass> classes;
  std::vector<Composition> scenes;

  int num_classes() const { return static_cast<int>(classes.size()); }

  const Composition& scene(const std::string& id) const;
  const Composition* find(const std::string& id) const;

  std::vector<const Composition*> select(Split split, SceneKind kind) const;
  // Sketch compositions of the given kind whose photo source is `photo_id`.
  std::vector<const Composition*> sketches_of(const std::string& photo_id, SceneKind kind) const;

  void reindex();

 private:
  std::unordered_map<std::string, std::size_t> by_id_;
  std::unordered_map<std::string, std::vector<std::size_t>> by_source_;
};

Dataset generate_dataset(std::uint64_t seed, const DatasetConfig& config);

// Writes manifest.json plus one PGM per raster and mask. The directory is
// created if missing; existing files with the same names are replaced.
void write_dataset(const Dataset& dataset, const std::filesystem::path& dir);

// Loads and validates a dataset directory. When `split` is given only scenes
// of that split are kept.
Dataset load_dataset(const std::filesystem::path& dir, std::optional<Split> split = std::nullopt);

// FNV-1a over sorted relative paths and file contents.
std::string hash_directory(const std::filesystem::path& dir);

// Object crops grouped by (domain, class), drawn from a set of scenes.
class InstancePool {
 public:
  InstancePool() = default;
  InstancePool(const std::vector<const Composition*>& scenes, int num_classes);

  void add(const ObjectInstance& obj);
  int num_classes() const { return num_classes_; }
  const std::vector<ObjectInstance>& of(Domain domain, int class_id) const;
  const ObjectInstance& sample(Domain domain, int class_id, Rng& rng) const;

 private:
  int num_classes_ = 0;
  std::map<std::pair<int, int>, std::vector<ObjectInstance>> items_;
};

// Same boxes, every object replaced by a random instance of a uniformly drawn
// different class (same domain as the source object).
Composition synthesize_swap_negative(const Composition& scene, const InstancePool& pool, Rng& rng);

}  // namespace sks::glyph
