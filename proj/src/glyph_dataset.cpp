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

#include "sketchscene/glyph/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include "json.hpp"

#include "sketchscene/glyph/render.hpp"
#include "sketchscene/image_io.hpp"

namespace sks::glyph {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------- types

std::string to_string(Domain d) { return d == Domain::kSketch ? "sketch" : "photo"; }

std::string to_string(Split s) {
  switch (s) {
    case Split::kTrain:
      return "train";
    case Split::kVal:
      return "val";
    case Split::kTest:
      return "test";
  }
  return "train";
}

std::string to_string(SceneKind k) {
  switch (k) {
    case SceneKind::kPhoto:
      return "photo";
    case SceneKind::kSoftSketch:
      return "soft_sketch";
    case SceneKind::kHardSketch:
      return "hard_sketch";
    case SceneKind::kSwapNegative:
      return "swap_negative";
  }
  return "photo";
}

Domain parse_domain(const std::string& s) {
  if (s == "sketch") return Domain::kSketch;
  if (s == "photo") return Domain::kPhoto;
  throw Error("unknown domain '" + s + "'");
}

Split parse_split(const std::string& s) {
  if (s == "train") return Split::kTrain;
  if (s == "val") return Split::kVal;
  if (s == "test") return Split::kTest;
  throw Error("unknown split '" + s + "'");
}

SceneKind parse_scene_kind(const std::string& s) {
  if (s == "photo") return SceneKind::kPhoto;
  if (s == "soft_sketch") return SceneKind::kSoftSketch;
  if (s == "hard_sketch") return SceneKind::kHardSketch;
  if (s == "swap_negative") return SceneKind::kSwapNegative;
  throw Error("unknown scene kind '" + s + "'");
}

namespace {

bool canonical_less(const ObjectInstance& a, const ObjectInstance& b) {
  const float aa = a.bbox.area(), ab = b.bbox.area();
  if (aa != ab) return aa > ab;
  return a.bbox.x0 < b.bbox.x0;
}

}  // namespace

void canonicalize(Composition& comp) { std::stable_sort(comp.objects.begin(), comp.objects.end(), canonical_less); }

bool is_canonical(const Composition& comp) {
  return std::is_sorted(comp.objects.begin(), comp.objects.end(), canonical_less);
}

void validate(const Composition& comp) {
  const std::string where = "scene '" + comp.scene_id + "': ";
  if (comp.objects.empty() || comp.objects.size() > static_cast<std::size_t>(kMaxObjects))
    throw Error(where + "object count " + std::to_string(comp.objects.size()) + " outside [1, 8]");
  for (std::size_t i = 0; i < comp.objects.size(); ++i) {
    const auto& o = comp.objects[i];
    const std::string at = where + "object " + std::to_string(i) + ": ";
    if (!o.bbox.well_ordered()) throw Error(at + "box corners not ordered (x0<x1, y0<y1)");
    if (!o.bbox.inside_unit()) throw Error(at + "box outside the unit square");
    if (o.raster.size() != static_cast<std::size_t>(kCropPixels)) throw Error(at + "raster is not 32x32");
    if (o.mask.size() != static_cast<std::size_t>(kCropPixels)) throw Error(at + "mask is not 32x32");
    if (std::none_of(o.mask.begin(), o.mask.end(), [](float v) { return v > 0.5f; })) throw Error(at + "empty mask");
    if (o.class_id < 0) throw Error(at + "negative class id");
  }
  if (!is_canonical(comp)) throw Error(where + "objects not in canonical (area-descending) order");
}

// ---------------------------------------------------------------- config

void DatasetConfig::validate() const {
  if (num_classes < 8 || num_classes > family_count())
    throw Error("dataset config: num_classes must be in [8, " + std::to_string(family_count()) + "], got " +
                std::to_string(num_classes));
  if (train_scenes < 0 || val_scenes < 0 || test_scenes < 0) throw Error("dataset config: negative scene count");
  if (train_scenes + val_scenes + test_scenes == 0) throw Error("dataset config: no scenes requested");
  if (min_objects < 1 || max_objects > kMaxObjects || min_objects > max_objects)
    throw Error("dataset config: object range must satisfy 1 <= min <= max <= 8");
  if (soft_pairs < 1) throw Error("dataset config: soft_pairs must be >= 1");
  if (sketch_pool_per_class < 1) throw Error("dataset config: sketch_pool_per_class must be >= 1");
}

// ---------------------------------------------------------------- Dataset

const Composition* Dataset::find(const std::string& id) const {
  auto it = by_id_.find(id);
  return it == by_id_.end() ? nullptr : &scenes[it->second];
}

const Composition& Dataset::scene(const std::string& id) const {
  if (const auto* c = find(id)) return *c;
  throw Error("unknown scene id '" + id + "'");
}

std::vector<const Composition*> Dataset::select(Split split, SceneKind kind) const {
  std::vector<const Composition*> out;
  for (const auto& c : scenes)
    if (c.split == split && c.kind == kind) out.push_back(&c);
  return out;
}

std::vector<const Composition*> Dataset::sketches_of(const std::string& photo_id, SceneKind kind) const {
  std::vector<const Composition*> out;
  auto it = by_source_.find(photo_id);
  if (it == by_source_.end()) return out;
  for (std::size_t i : it->second)
    if (scenes[i].kind == kind) out.push_back(&scenes[i]);
  return out;
}

void Dataset::reindex() {
  by_id_.clear();
  by_source_.clear();
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    if (!by_id_.emplace(scenes[i].scene_id, i).second) throw Error("duplicate scene id '" + scenes[i].scene_id + "'");
    if (!scenes[i].paired_scene_id.empty()) by_source_[scenes[i].paired_scene_id].push_back(i);
  }
}

// ---------------------------------------------------------------- generation

namespace {

struct ClassGeometry {
  double aspect;  // width / height
  double scale;   // typical side length
};

ClassGeometry class_geometry(int family) {
  static const ClassGeometry table[] = {
      {1.0, 0.28}, {1.1, 0.27}, {0.9, 0.36}, {0.65, 0.38}, {1.0, 0.23}, {1.0, 0.25},
      {1.6, 0.30}, {1.0, 0.27}, {0.8, 0.26}, {1.05, 0.26}, {0.9, 0.24}, {1.05, 0.25},
  };
  return table[family];
}

BBox sample_box(int class_id, const std::vector<ObjectInstance>& placed, Rng& rng) {
  const ClassGeometry g = class_geometry(class_id);
  BBox best;
  for (int attempt = 0; attempt < 20; ++attempt) {
    const double side = g.scale * rng.uniform(0.75, 1.25);
    const double aspect = g.aspect * rng.uniform(0.85, 1.15);
    const double w = std::min(0.9, side * std::sqrt(aspect));
    const double h = std::min(0.9, side / std::sqrt(aspect));
    const double x0 = rng.uniform(0.0, 1.0 - w), y0 = rng.uniform(0.0, 1.0 - h);
    BBox b{static_cast<float>(x0), static_cast<float>(y0), static_cast<float>(x0 + w), static_cast<float>(y0 + h)};
    b.x1 = std::min(b.x1, 1.0f);
    b.y1 = std::min(b.y1, 1.0f);
    best = b;
    bool crowded = false;
    for (const auto& o : placed) {
      const float ix = std::max(0.0f, std::min(b.x1, o.bbox.x1) - std::max(b.x0, o.bbox.x0));
      const float iy = std::max(0.0f, std::min(b.y1, o.bbox.y1) - std::max(b.y0, o.bbox.y0));
      const float inter = ix * iy;
      if (inter / (b.area() + o.bbox.area() - inter) > 0.4f) crowded = true;
    }
    if (!crowded) break;
  }
  return best;
}

struct SketchPoolEntry {
  std::vector<float> raster;
  std::vector<float> mask;
};

std::string scene_name(Split split, int index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s_p%05d", to_string(split).c_str(), index);
  return buf;
}

void generate_split(Dataset& ds, Split split, int count, Rng rng) {
  const DatasetConfig& cfg = ds.config;
  const int C = cfg.num_classes;
  // Sketch pool: the stand-in for a free-hand sketch collection.
  std::vector<std::vector<SketchPoolEntry>> pool(static_cast<std::size_t>(C));
  for (int c = 0; c < C; ++c)
    for (int k = 0; k < cfg.sketch_pool_per_class; ++k) {
      const Shape shape = make_shape(c, rng.next());
      RenderedCrop crop = render_sketch(shape, rng.next());
      pool[static_cast<std::size_t>(c)].push_back({std::move(crop.raster), std::move(crop.mask)});
    }

  // Classes come from a reshuffled deck so every class is equally frequent.
  std::vector<int> deck;
  auto draw_class = [&] {
    if (deck.empty()) {
      for (int c = 0; c < C; ++c) deck.push_back(c);
      shuffle(deck, rng);
    }
    const int c = deck.back();
    deck.pop_back();
    return c;
  };

  for (int s = 0; s < count; ++s) {
    Composition photo;
    photo.scene_id = scene_name(split, s);
    photo.split = split;
    photo.kind = SceneKind::kPhoto;
    photo.background = rng.below(kBackgroundCount);
    const int n = cfg.min_objects + rng.below(cfg.max_objects - cfg.min_objects + 1);

    Composition hard;
    hard.scene_id = photo.scene_id + "_h";
    hard.split = split;
    hard.kind = SceneKind::kHardSketch;
    hard.background = photo.background;
    hard.paired_scene_id = photo.scene_id;

    for (int i = 0; i < n; ++i) {
      const int cls = draw_class();
      ObjectInstance obj;
      obj.class_id = cls;
      obj.domain = Domain::kPhoto;
      obj.bbox = sample_box(cls, photo.objects, rng);
      const Shape shape = make_shape(cls, rng.next());
      RenderedCrop pc = render_photo(shape, rng.next());
      obj.raster = std::move(pc.raster);
      obj.mask = std::move(pc.mask);
      RenderedCrop hc = render_sketch(shape, rng.next());
      ObjectInstance h = obj;
      h.domain = Domain::kSketch;
      h.raster = std::move(hc.raster);
      h.mask = std::move(hc.mask);
      photo.objects.push_back(std::move(obj));
      hard.objects.push_back(std::move(h));
    }
    // Sort both with the same permutation (the photo's order).
    std::vector<std::size_t> order(photo.objects.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return canonical_less(photo.objects[a], photo.objects[b]);
    });
    Composition sorted_photo = photo, sorted_hard = hard;
    for (std::size_t i = 0; i < order.size(); ++i) {
      sorted_photo.objects[i] = photo.objects[order[i]];
      sorted_hard.objects[i] = hard.objects[order[i]];
    }

    std::vector<Composition> softs;
    for (int k = 0; k < cfg.soft_pairs; ++k) {
      Composition soft;
      soft.scene_id = photo.scene_id + "_s" + std::to_string(k);
      soft.split = split;
      soft.kind = SceneKind::kSoftSketch;
      soft.background = photo.background;
      soft.paired_scene_id = photo.scene_id;
      for (const auto& o : sorted_photo.objects) {
        const auto& entries = pool[static_cast<std::size_t>(o.class_id)];
        const auto& e = entries[static_cast<std::size_t>(rng.below(static_cast<int>(entries.size())))];
        ObjectInstance so;
        so.class_id = o.class_id;
        so.domain = Domain::kSketch;
        so.bbox = o.bbox;
        so.raster = e.raster;
        so.mask = e.mask;
        soft.objects.push_back(std::move(so));
      }
      softs.push_back(std::move(soft));
    }
    ds.scenes.push_back(std::move(sorted_photo));
    for (auto& soft : softs) ds.scenes.push_back(std::move(soft));
    ds.scenes.push_back(std::move(sorted_hard));
  }
}

std::string file_stem(const std::string& scene_id, std::size_t index) { return scene_id + "_" + std::to_string(index); }

}  // namespace

Dataset generate_dataset(std::uint64_t seed, const DatasetConfig& config) {
  config.validate();
  Dataset ds;
  ds.seed = seed;
  ds.config = config;
  for (int c = 0; c < config.num_classes; ++c) ds.classes.push_back({c, family_names()[static_cast<std::size_t>(c)], family_names()[static_cast<std::size_t>(c)]});
  Rng master(seed);
  Rng train_rng = master.fork(), val_rng = master.fork(), test_rng = master.fork();
  generate_split(ds, Split::kTrain, config.train_scenes, train_rng);
  generate_split(ds, Split::kVal, config.val_scenes, val_rng);
  generate_split(ds, Split::kTest, config.test_scenes, test_rng);
  ds.reindex();
  return ds;
}

// ---------------------------------------------------------------- disk format

void write_dataset(const Dataset& dataset, const fs::path& dir) {
  fs::create_directories(dir / "crops");
  fs::create_directories(dir / "masks");
  json manifest;
  manifest["version"] = 1;
  manifest["seed"] = dataset.seed;
  manifest["config"] = {{"num_classes", dataset.config.num_classes},
                        {"train_scenes", dataset.config.train_scenes},
                        {"val_scenes", dataset.config.val_scenes},
                        {"test_scenes", dataset.config.test_scenes},
                        {"min_objects", dataset.config.min_objects},
                        {"max_objects", dataset.config.max_objects},
                        {"soft_pairs", dataset.config.soft_pairs},
                        {"sketch_pool_per_class", dataset.config.sketch_pool_per_class}};
  json classes = json::array();
  for (const auto& c : dataset.classes) classes.push_back({{"class_id", c.class_id}, {"name", c.name}, {"family", c.family}});
  manifest["classes"] = classes;
  manifest["backgrounds"] = json::array({"grass", "sky"});
  json scenes = json::array();
  for (const auto& comp : dataset.scenes) {
    json objs = json::array();
    for (std::size_t i = 0; i < comp.objects.size(); ++i) {
      const auto& o = comp.objects[i];
      const std::string stem = file_stem(comp.scene_id, i);
      const std::string raster_file = "crops/" + stem + ".pgm";
      const std::string mask_file = "masks/" + stem + ".pgm";
      write_file(dir / raster_file, encode_pgm(to_gray(o.raster, kCropSize, kCropSize)));
      write_file(dir / mask_file, encode_pgm(to_gray(o.mask, kCropSize, kCropSize)));
      objs.push_back({{"class_id", o.class_id},
                      {"bbox", {o.bbox.x0, o.bbox.y0, o.bbox.x1, o.bbox.y1}},
                      {"raster", raster_file},
                      {"mask", mask_file},
                      {"domain", to_string(o.domain)}});
    }
    json entry = {{"id", comp.scene_id},
                  {"split", to_string(comp.split)},
                  {"kind", to_string(comp.kind)},
                  {"paired_scene_id", comp.paired_scene_id},
                  {"objects", objs}};
    entry["background"] = comp.background ? json(*comp.background) : json(nullptr);
    scenes.push_back(std::move(entry));
  }
  manifest["scenes"] = scenes;
  write_file(dir / "manifest.json", manifest.dump(1));
}

Dataset load_dataset(const fs::path& dir, std::optional<Split> split) {
  const fs::path manifest_path = dir / "manifest.json";
  if (!fs::exists(manifest_path)) throw Error("dataset: missing manifest " + manifest_path.string());
  json manifest;
  try {
    manifest = json::parse(read_file(manifest_path));
  } catch (const json::exception& e) {
    throw Error("dataset: malformed manifest: " + std::string(e.what()));
  }
  Dataset ds;
  try {
    ds.seed = manifest.at("seed").get<std::uint64_t>();
    const auto& cfg = manifest.at("config");
    ds.config.num_classes = cfg.at("num_classes");
    ds.config.train_scenes = cfg.at("train_scenes");
    ds.config.val_scenes = cfg.at("val_scenes");
    ds.config.test_scenes = cfg.at("test_scenes");
    ds.config.min_objects = cfg.at("min_objects");
    ds.config.max_objects = cfg.at("max_objects");
    ds.config.soft_pairs = cfg.at("soft_pairs");
    ds.config.sketch_pool_per_class = cfg.at("sketch_pool_per_class");
    for (const auto& c : manifest.at("classes"))
      ds.classes.push_back({c.at("class_id").get<int>(), c.at("name").get<std::string>(), c.at("family").get<std::string>()});
  } catch (const json::exception& e) {
    throw Error("dataset: malformed manifest header: " + std::string(e.what()));
  }
  for (const auto& entry : manifest.at("scenes")) {
    Composition comp;
    std::string id = entry.value("id", std::string("<unnamed>"));
    try {
      comp.scene_id = id;
      comp.split = parse_split(entry.at("split"));
      if (split && comp.split != *split) continue;
      comp.kind = parse_scene_kind(entry.at("kind"));
      comp.paired_scene_id = entry.value("paired_scene_id", std::string());
      if (!entry.at("background").is_null()) comp.background = entry.at("background").get<int>();
      for (const auto& o : entry.at("objects")) {
        ObjectInstance obj;
        obj.class_id = o.at("class_id");
        const auto& b = o.at("bbox");
        if (!b.is_array() || b.size() != 4) throw Error("bbox must have 4 numbers");
        obj.bbox = {b[0].get<float>(), b[1].get<float>(), b[2].get<float>(), b[3].get<float>()};
        obj.domain = parse_domain(o.at("domain"));
        const fs::path raster = dir / o.at("raster").get<std::string>();
        const fs::path mask = dir / o.at("mask").get<std::string>();
        if (!fs::exists(raster)) throw Error("missing raster file " + raster.string());
        if (!fs::exists(mask)) throw Error("missing mask file " + mask.string());
        const GrayImage r = decode_pgm(read_file(raster));
        const GrayImage m = decode_pgm(read_file(mask));
        if (r.width != kCropSize || r.height != kCropSize || m.width != kCropSize || m.height != kCropSize)
          throw Error("raster/mask must be 32x32");
        obj.raster = from_gray(r);
        obj.mask.resize(m.pixels.size());
        for (std::size_t i = 0; i < m.pixels.size(); ++i) obj.mask[i] = m.pixels[i] >= 128 ? 1.0f : 0.0f;
        if (obj.class_id >= ds.num_classes()) throw Error("class id out of range");
        comp.objects.push_back(std::move(obj));
      }
      validate(comp);
    } catch (const Error& e) {
      const std::string msg = e.what();
      if (msg.rfind("scene '", 0) == 0) throw;
      throw Error("scene '" + id + "': " + msg);
    } catch (const json::exception& e) {
      throw Error("scene '" + id + "': " + e.what());
    }
    ds.scenes.push_back(std::move(comp));
  }
  ds.reindex();
  return ds;
}

std::string hash_directory(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) files.push_back(fs::relative(e.path(), dir));
  std::sort(files.begin(), files.end());
  Fnv1a h;
  for (const auto& f : files) {
    h.update(f.generic_string());
    h.update("\0", 1);
    h.update(read_file(dir / f));
  }
  return h.hex();
}

// ---------------------------------------------------------------- negatives

InstancePool::InstancePool(const std::vector<const Composition*>& scenes, int num_classes) : num_classes_(num_classes) {
  for (const auto* c : scenes)
    for (const auto& o : c->objects) add(o);
}

void InstancePool::add(const ObjectInstance& obj) {
  num_classes_ = std::max(num_classes_, obj.class_id + 1);
  items_[{static_cast<int>(obj.domain), obj.class_id}].push_back(obj);
}

const std::vector<ObjectInstance>& InstancePool::of(Domain domain, int class_id) const {
  static const std::vector<ObjectInstance> empty;
  auto it = items_.find({static_cast<int>(domain), class_id});
  return it == items_.end() ? empty : it->second;
}

const ObjectInstance& InstancePool::sample(Domain domain, int class_id, Rng& rng) const {
  const auto& v = of(domain, class_id);
  if (v.empty()) throw Error("instance pool has no " + to_string(domain) + " instance of class " + std::to_string(class_id));
  return v[static_cast<std::size_t>(rng.below(static_cast<int>(v.size())))];
}

Composition synthesize_swap_negative(const Composition& scene, const InstancePool& pool, Rng& rng) {
  if (scene.objects.empty()) throw Error("swap negative: scene '" + scene.scene_id + "' has no objects");
  const int C = pool.num_classes();
  if (C < 2) throw Error("swap negative: needs at least 2 classes, pool has " + std::to_string(C));
  Composition out;
  out.scene_id = scene.scene_id + "_swap";
  out.split = scene.split;
  out.kind = SceneKind::kSwapNegative;
  out.background = scene.background;
  out.paired_scene_id = scene.scene_id;
  for (const auto& o : scene.objects) {
    int cls = rng.below(C - 1);
    if (cls >= o.class_id) ++cls;
    const ObjectInstance& src = pool.sample(o.domain, cls, rng);
    ObjectInstance n;
    n.class_id = cls;
    n.domain = o.domain;
    n.bbox = o.bbox;
    n.raster = src.raster;
    n.mask = src.mask;
    out.objects.push_back(std::move(n));
  }
  return out;
}

}  // namespace sks::glyph
