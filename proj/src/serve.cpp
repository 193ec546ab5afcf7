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

#include "sketchscene/serve/service.hpp"

#include <algorithm>
#include <cmath>

#include "sketchscene/glyph/render.hpp"
#include "sketchscene/image_io.hpp"
#include "sketchscene/layout/compose.hpp"
#include "sketchscene/pipeline/eval.hpp"

// After Eigen: <resolv.h> (pulled in by httplib) defines _res as a macro.
#include "httplib.h"

namespace sks::serve {

namespace fs = std::filesystem;
using glyph::Composition;
using glyph::ObjectInstance;
using nlohmann::json;

std::shared_ptr<const Snapshot> load_snapshot(const fs::path& checkpoint, const fs::path& dataset_dir,
                                              const std::optional<fs::path>& index_file, glyph::Split split) {
  auto snap = std::make_shared<Snapshot>();
  snap->model = pipeline::load_model(checkpoint);
  snap->checkpoint_hash = pipeline::checkpoint_file_hash(checkpoint);
  snap->data = std::make_shared<const glyph::Dataset>(glyph::load_dataset(dataset_dir));
  if (snap->data->num_classes() != snap->model->num_classes())
    throw Error("dataset has " + std::to_string(snap->data->num_classes()) + " classes but the checkpoint expects " +
                std::to_string(snap->model->num_classes()));
  if (index_file) {
    snap->index = retrieval::EmbeddingIndex::load(*index_file);
  } else {
    snap->index = pipeline::build_index(*snap->model, snap->data->select(split, glyph::SceneKind::kPhoto));
  }
  return snap;
}

namespace {

[[noreturn]] void bad(const std::string& field, const std::string& message, int status = 400) {
  throw RequestError(status, field, field + ": " + message);
}

// "scene_id:index" -> the object it names, or nullptr when it does not resolve.
const ObjectInstance* resolve_crop(const glyph::Dataset* data, const std::string& ref, const std::string& field) {
  const auto colon = ref.rfind(':');
  if (colon == std::string::npos || colon == 0 || colon + 1 == ref.size())
    bad(field, "crop reference must look like 'scene_id:object_index'");
  const std::string idx = ref.substr(colon + 1);
  if (idx.find_first_not_of("0123456789") != std::string::npos) bad(field, "object index is not a number");
  if (data == nullptr) bad(field, "no dataset loaded to resolve '" + ref + "'", 404);
  const Composition* scene = data->find(ref.substr(0, colon));
  if (scene == nullptr) bad(field, "unknown scene in crop reference '" + ref + "'", 404);
  const std::size_t i = std::stoul(idx);
  if (i >= scene->objects.size()) bad(field, "scene has no object " + idx, 404);
  return &scene->objects[i];
}

glyph::BBox parse_bbox(const json& j, const std::string& field) {
  if (!j.is_array() || j.size() != 4) bad(field, "expected [x0, y0, x1, y1]");
  float v[4];
  for (int k = 0; k < 4; ++k) {
    if (!j[static_cast<std::size_t>(k)].is_number()) bad(field, "coordinates must be numbers");
    v[k] = j[static_cast<std::size_t>(k)].get<float>();
    if (!std::isfinite(v[k])) bad(field, "coordinates must be finite");
  }
  const glyph::BBox b{v[0], v[1], v[2], v[3]};
  if (!b.well_ordered() || !b.inside_unit()) bad(field, "box must satisfy 0 <= x0 < x1 <= 1 and 0 <= y0 < y1 <= 1");
  return b;
}

std::vector<float> parse_raster(const json& j, const std::string& field) {
  if (!j.is_string()) bad(field, "expected a base64 PGM string");
  GrayImage img;
  try {
    img = decode_pgm(base64_decode(j.get<std::string>()));
  } catch (const Error& e) {
    bad(field, std::string("not a base64 PGM (") + e.what() + ")");
  }
  if (img.width != glyph::kCropSize || img.height != glyph::kCropSize)
    bad(field, "raster must be " + std::to_string(glyph::kCropSize) + "x" + std::to_string(glyph::kCropSize) + ", got " +
                   std::to_string(img.width) + "x" + std::to_string(img.height));
  return from_gray(img);
}

void mirror(std::vector<float>& v) {
  if (v.empty()) return;
  for (int y = 0; y < glyph::kCropSize; ++y)
    std::reverse(v.begin() + y * glyph::kCropSize, v.begin() + (y + 1) * glyph::kCropSize);
}

json bbox_json(const glyph::BBox& b) { return json::array({b.x0, b.y0, b.x1, b.y1}); }

std::string crop_ref(const Composition& s, std::size_t i) { return s.scene_id + ":" + std::to_string(i); }

std::optional<int> parse_background(const json& request) {
  if (!request.contains("background_class") || request["background_class"].is_null()) return std::nullopt;
  const json& b = request["background_class"];
  if (!b.is_number_integer()) bad("background_class", "expected an integer");
  const int v = b.get<int>();
  if (v < 0 || v >= glyph::kBackgroundCount)
    bad("background_class", "must lie in [0, " + std::to_string(glyph::kBackgroundCount) + ")");
  return v;
}

int parse_k(const json& request) {
  if (!request.contains("k")) return kDefaultK;
  if (!request["k"].is_number_integer()) bad("k", "expected an integer");
  const int k = request["k"].get<int>();
  if (k < 1) bad("k", "must be at least 1");
  return k;
}

}  // namespace

Composition parse_composition(const json& request, const glyph::Dataset* data, int num_classes) {
  if (!request.is_object()) bad("body", "expected a JSON object");
  if (!request.contains("objects")) bad("objects", "missing");
  const json& objs = request["objects"];
  if (!objs.is_array()) bad("objects", "expected an array");
  if (objs.empty() || objs.size() > static_cast<std::size_t>(glyph::kMaxObjects))
    bad("objects", "a composition needs 1 to 8 objects, got " + std::to_string(objs.size()));

  Composition comp;
  comp.scene_id = "request";
  comp.background = parse_background(request);
  for (std::size_t i = 0; i < objs.size(); ++i) {
    const std::string at = "objects[" + std::to_string(i) + "]";
    const json& o = objs[i];
    if (!o.is_object()) bad(at, "expected an object");
    const bool has_raster = o.contains("raster"), has_crop = o.contains("crop");
    if (has_raster == has_crop) bad(at + ".raster", "give exactly one of 'raster' and 'crop'");

    ObjectInstance obj;
    const ObjectInstance* crop = nullptr;
    if (has_crop) {
      if (!o["crop"].is_string()) bad(at + ".crop", "expected a string");
      crop = resolve_crop(data, o["crop"].get<std::string>(), at + ".crop");
      obj = *crop;
    } else {
      obj.raster = parse_raster(o["raster"], at + ".raster");
    }

    if (o.contains("class_id")) {
      if (!o["class_id"].is_number_integer()) bad(at + ".class_id", "expected an integer");
      obj.class_id = o["class_id"].get<int>();
    } else if (!crop) {
      bad(at + ".class_id", "missing");
    }
    if (obj.class_id < 0 || obj.class_id >= num_classes)
      bad(at + ".class_id", "must lie in [0, " + std::to_string(num_classes) + ")");

    if (o.contains("domain")) {
      if (!o["domain"].is_string()) bad(at + ".domain", "expected \"sketch\" or \"photo\"");
      try {
        obj.domain = glyph::parse_domain(o["domain"].get<std::string>());
      } catch (const Error&) {
        bad(at + ".domain", "expected \"sketch\" or \"photo\"");
      }
    } else if (!crop) {
      bad(at + ".domain", "missing");
    }

    if (o.contains("bbox")) {
      obj.bbox = parse_bbox(o["bbox"], at + ".bbox");
    } else if (!crop) {
      bad(at + ".bbox", "missing");
    }

    if (o.contains("flip")) {
      if (!o["flip"].is_boolean()) bad(at + ".flip", "expected a boolean");
      if (o["flip"].get<bool>()) {
        mirror(obj.raster);
        mirror(obj.mask);
      }
    }
    comp.objects.push_back(std::move(obj));
  }
  return comp;
}

void Service::load(std::shared_ptr<const Snapshot> snapshot) {
  std::lock_guard<std::mutex> lock(mu_);
  snapshot_ = std::move(snapshot);
}

std::shared_ptr<const Snapshot> Service::snapshot() const {
  std::lock_guard<std::mutex> lock(mu_);
  return snapshot_;
}

namespace {

json error_body(const std::string& message, const std::string& field = {}) {
  json j = {{"error", message}};
  if (!field.empty()) j["field"] = field;
  return j;
}

json scene_json(const Composition& s) {
  const auto px = glyph::render_scene(s, kThumbnailSize);
  json objects = json::array();
  for (std::size_t i = 0; i < s.objects.size(); ++i) {
    const auto& o = s.objects[i];
    objects.push_back({{"crop", crop_ref(s, i)},
                       {"class_id", o.class_id},
                       {"domain", glyph::to_string(o.domain)},
                       {"bbox", bbox_json(o.bbox)}});
  }
  return {{"scene_id", s.scene_id},
          {"split", glyph::to_string(s.split)},
          {"kind", glyph::to_string(s.kind)},
          {"background_class", s.background ? json(*s.background) : json(nullptr)},
          {"width", kThumbnailSize},
          {"height", kThumbnailSize},
          {"pgm", base64_encode(encode_pgm(to_gray(px, kThumbnailSize, kThumbnailSize)))},
          {"objects", objects}};
}

Response route(const Snapshot& snap, const std::string& method, const std::string& path, const std::string& body) {
  const pipeline::Model& model = *snap.model;
  auto parse_body = [&] {
    try {
      return json::parse(body);
    } catch (const json::parse_error& e) {
      bad("body", std::string("malformed JSON (") + e.what() + ")");
    }
  };
  auto composition = [&](const json& request) {
    return parse_composition(request, snap.data.get(), model.num_classes());
  };

  if (path == "/healthz" && method == "GET")
    return {200, {{"status", "ok"}, {"index_size", snap.index.size()}, {"num_classes", model.num_classes()}}};

  if (path == "/embed" && method == "POST") {
    const Composition c = composition(parse_body());
    return {200, {{"embedding", model.embed({&c})[0]}}};
  }

  if (path == "/search" && method == "POST") {
    const json request = parse_body();
    const int k = parse_k(request);
    const Composition c = composition(request);
    if (snap.index.size() == 0) return {503, error_body("no index loaded")};
    json results = json::array();
    for (const auto& hit : snap.index.search(model.embed({&c})[0], k)) {
      json crops = json::array();
      if (const Composition* s = snap.data ? snap.data->find(hit.scene_id) : nullptr)
        for (std::size_t i = 0; i < s->objects.size(); ++i) crops.push_back(crop_ref(*s, i));
      results.push_back({{"scene_id", hit.scene_id},
                         {"distance", hit.distance},
                         {"thumbnail", "/dataset/scenes/" + hit.scene_id},
                         {"crops", crops}});
    }
    return {200, {{"k", k}, {"results", results}}};
  }

  if (path == "/synthesize" && method == "POST") {
    const json request = parse_body();
    const Composition c = composition(request);
    if (!model.has_generators()) return {503, error_body("loaded model has no generation heads")};
    const int bg = c.background.value_or(0);
    const auto s = pipeline::synthesize(model, c, bg);
    json boxes = json::array();
    for (const auto& b : s.boxes) boxes.push_back(bbox_json(b));
    const int num_ids = model.num_classes() + glyph::kBackgroundCount;
    return {200,
            {{"width", s.layout.width},
             {"height", s.layout.height},
             {"background_class", bg},
             {"boxes", boxes},
             {"layout_pgm", base64_encode(encode_pgm(layout::layout_to_gray(s.layout)))},
             {"layout_ppm", base64_encode(encode_ppm(layout::colorize(s.layout, num_ids)))}}};
  }

  const std::string scenes = "/dataset/scenes/", crops = "/dataset/crops/";
  if (method == "GET" && path.rfind(scenes, 0) == 0) {
    const std::string id = path.substr(scenes.size());
    const Composition* s = snap.data ? snap.data->find(id) : nullptr;
    if (s == nullptr) return {404, error_body("unknown scene '" + id + "'", "id")};
    return {200, scene_json(*s)};
  }
  if (method == "GET" && path.rfind(crops, 0) == 0) {
    const std::string ref = path.substr(crops.size());
    const ObjectInstance* o = resolve_crop(snap.data.get(), ref, "id");
    return {200,
            {{"crop", ref},
             {"class_id", o->class_id},
             {"domain", glyph::to_string(o->domain)},
             {"bbox", bbox_json(o->bbox)},
             {"width", glyph::kCropSize},
             {"height", glyph::kCropSize},
             {"pgm", base64_encode(encode_pgm(to_gray(o->raster, glyph::kCropSize, glyph::kCropSize)))},
             {"mask_pgm", base64_encode(encode_pgm(to_gray(o->mask, glyph::kCropSize, glyph::kCropSize)))}}};
  }

  for (const char* known : {"/healthz", "/embed", "/search", "/synthesize"})
    if (path == known) return {405, error_body("method " + method + " not allowed on " + path)};
  return {404, error_body("no route for " + method + " " + path)};
}

}  // namespace

Response Service::handle(const std::string& method, const std::string& path, const std::string& body) const {
  const auto snap = snapshot();
  Response r;
  if (!snap || !snap->model) {
    r = path == "/healthz" ? Response{503, {{"status", "no_model"}}} : Response{503, error_body("no model loaded")};
  } else {
    try {
      r = route(*snap, method, path, body);
    } catch (const RequestError& e) {
      r = {e.status(), error_body(e.what(), e.field())};
    } catch (const std::exception& e) {
      r = {500, error_body(e.what())};
    }
  }
  r.body["checkpoint_hash"] = snap ? json(snap->checkpoint_hash) : json(nullptr);
  return r;
}

HttpServer::HttpServer(Service& service, ServerOptions options)
    : service_(service), options_(std::move(options)), server_(std::make_unique<httplib::Server>()) {
  auto handler = [this](const httplib::Request& req, httplib::Response& res) {
    const Response r = service_.handle(req.method, req.path, req.body);
    res.status = r.status;
    const auto& h = r.body["checkpoint_hash"];
    res.set_header("X-Checkpoint-Hash", h.is_string() ? h.get<std::string>() : "");
    res.set_content(r.body.dump(), "application/json");
  };
  server_->Get(".*", handler);
  server_->Post(".*", handler);
  server_->Options(".*", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
  if (!options_.cors_origin.empty()) {
    server_->set_default_headers({{"Access-Control-Allow-Origin", options_.cors_origin},
                                  {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
                                  {"Access-Control-Allow-Headers", "Content-Type"},
                                  {"Access-Control-Expose-Headers", "X-Checkpoint-Hash"}});
  }
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind() {
  const int port = options_.port == 0 ? server_->bind_to_any_port(options_.addr)
                                      : (server_->bind_to_port(options_.addr, options_.port) ? options_.port : -1);
  if (port < 0) throw Error("cannot bind " + options_.addr + ":" + std::to_string(options_.port));
  return port;
}

void HttpServer::listen() {
  if (!server_->listen_after_bind()) throw Error("server stopped with an error");
}

void HttpServer::stop() {
  if (server_) server_->stop();
}

}  // namespace sks::serve
