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

// Exhaustive L2 index over scene embeddings and the recall@k protocol.

#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace sks::retrieval {

struct Hit {
  std::string scene_id;
  float distance = 0;
};

class EmbeddingIndex {
 public:
  explicit EmbeddingIndex(int dim = 128) : dim_(dim) {}

  void add(const std::string& scene_id, const std::vector<float>& vector);

  // k nearest by L2, ascending distance, ties by scene id. k larger than the
  // corpus is truncated with a warning.
  std::vector<Hit> search(const std::vector<float>& query, int k) const;

  std::size_t size() const { return ids_.size(); }
  int dim() const { return dim_; }
  const std::vector<std::string>& ids() const { return ids_; }
  std::vector<float> vector(std::size_t i) const;
  std::optional<std::size_t> find(const std::string& id) const;

  // "SDIX", u32 count, u32 dim, count*dim float32 LE, then count ids as
  // (u32 length, bytes).
  void save(const std::filesystem::path& path) const;
  static EmbeddingIndex load(const std::filesystem::path& path);

 private:
  int dim_;
  std::vector<std::string> ids_;
  std::vector<float> data_;
  std::map<std::string, std::size_t> by_id_;
};

struct Query {
  std::string query_id;
  std::vector<float> embedding;
  std::string paired_scene_id;  // empty: no relevant scene
  std::vector<int> classes;     // for class-multiset precision
};

struct RetrievalReport {
  std::map<int, double> recall;     // k -> recall@k
  std::map<int, double> precision;  // k -> class-multiset precision@k
  int evaluated = 0;
  int excluded = 0;  // queries whose paired scene is missing from the index
  // rank (1-based) of the paired scene for every evaluated query
  std::vector<int> ranks;
};

// Class multiset of each corpus scene, keyed by scene id; used to judge
// precision relevance. May be empty, which leaves precision unset.
using ClassTable = std::map<std::string, std::vector<int>>;

RetrievalReport evaluate_retrieval(const EmbeddingIndex& index, const std::vector<Query>& queries,
                                   const std::vector<int>& ks = {1, 5, 10}, const ClassTable& classes = {});

}  // namespace sks::retrieval
