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

// HTTP service over an immutable model/index/dataset snapshot.
//
// Routes (all bodies JSON, every body carries "checkpoint_hash"):
//   GET  /healthz
//   POST /embed              CompositionRequest -> {"embedding": [128]}
//   POST /search             CompositionRequest -> {"results": [...]}
//   POST /synthesize         CompositionRequest -> base64 layout PGM + PPM
//   GET  /dataset/scenes/{id}
//   GET  /dataset/crops/{scene_id:object_index}
//
// CompositionRequest:
//   {"objects": [{"class_id": int, "domain": "sketch"|"photo",
//                 "bbox": [x0, y0, x1, y1],
//                 "raster": base64 32x32 PGM  |  "crop": "scene_id:index",
//                 "flip": bool (optional, mirrors the raster)}],
//    "background_class": int (optional), "k": int (optional, search)}

#pragma once

#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include "json.hpp"
#include "sketchscene/glyph/dataset.hpp"
#include "sketchscene/pipeline/train.hpp"
#include "sketchscene/retrieval/index.hpp"

namespace httplib {
class Server;
}

namespace sks::serve {

inline constexpr int kDefaultK = 10;
inline constexpr int kThumbnailSize = 128;

struct Snapshot {
  std::shared_ptr<const pipeline::Model> model;
  retrieval::EmbeddingIndex index;
  std::shared_ptr<const glyph::Dataset> data;
  std::string checkpoint_hash;
};

// Checkpoint + dataset directory; the index file is optional and is built
// from the dataset's photo scenes of `split` when absent.
std::shared_ptr<const Snapshot> load_snapshot(const std::filesystem::path& checkpoint,
                                              const std::filesystem::path& dataset_dir,
                                              const std::optional<std::filesystem::path>& index_file,
                                              glyph::Split split = glyph::Split::kTest);

struct Response {
  int status = 200;
  nlohmann::json body;
};

// Thrown while decoding a request; `field` is a path like "objects[1].bbox".
class RequestError : public Error {
 public:
  RequestError(int status, std::string field, const std::string& message)
      : Error(message), status_(status), field_(std::move(field)) {}
  int status() const { return status_; }
  const std::string& field() const { return field_; }

 private:
  int status_;
  std::string field_;
};

// Parses a CompositionRequest. Crop references resolve against `data`,
// which may be null (then any crop reference is unresolvable).
glyph::Composition parse_composition(const nlohmann::json& request, const glyph::Dataset* data, int num_classes);

class Service {
 public:
  Service() = default;
  explicit Service(std::shared_ptr<const Snapshot> snapshot) { load(std::move(snapshot)); }

  // Replaces the snapshot; requests in flight keep the one they started with.
  void load(std::shared_ptr<const Snapshot> snapshot);
  std::shared_ptr<const Snapshot> snapshot() const;

  Response handle(const std::string& method, const std::string& path, const std::string& body) const;

 private:
  mutable std::mutex mu_;
  std::shared_ptr<const Snapshot> snapshot_;
};

struct ServerOptions {
  std::string addr = "127.0.0.1";
  int port = 8080;  // 0 picks a free port
  std::string cors_origin;  // empty disables CORS headers
};

// httplib front end. bind() returns the bound port; listen() blocks until stop().
class HttpServer {
 public:
  HttpServer(Service& service, ServerOptions options);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  int bind();
  void listen();
  void stop();

 private:
  Service& service_;
  ServerOptions options_;
  std::unique_ptr<httplib::Server> server_;
};

}  // namespace sks::serve
