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

#include "sketchscene/retrieval/index.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>

#include "sketchscene/common.hpp"
#include "sketchscene/image_io.hpp"

namespace sks::retrieval {

static_assert(std::endian::native == std::endian::little, "index files are written in native little-endian order");

void EmbeddingIndex::add(const std::string& scene_id, const std::vector<float>& vector) {
  if (static_cast<int>(vector.size()) != dim_)
    throw Error("index: vector for '" + scene_id + "' has " + std::to_string(vector.size()) + " values, expected " +
                std::to_string(dim_));
  if (by_id_.count(scene_id)) throw Error("index: duplicate scene id '" + scene_id + "'");
  by_id_[scene_id] = ids_.size();
  ids_.push_back(scene_id);
  data_.insert(data_.end(), vector.begin(), vector.end());
}

std::vector<float> EmbeddingIndex::vector(std::size_t i) const {
  return {data_.begin() + static_cast<std::ptrdiff_t>(i * dim_),
          data_.begin() + static_cast<std::ptrdiff_t>((i + 1) * dim_)};
}

std::optional<std::size_t> EmbeddingIndex::find(const std::string& id) const {
  auto it = by_id_.find(id);
  if (it == by_id_.end()) return std::nullopt;
  return it->second;
}

std::vector<Hit> EmbeddingIndex::search(const std::vector<float>& query, int k) const {
  if (static_cast<int>(query.size()) != dim_) throw Error("search: query has wrong dimension");
  if (k < 1) throw Error("search: k must be positive");
  if (ids_.empty()) throw Error("search: empty index");
  if (static_cast<std::size_t>(k) > ids_.size()) {
    warn("search: k=" + std::to_string(k) + " exceeds corpus size " + std::to_string(ids_.size()) + "; truncated");
    k = static_cast<int>(ids_.size());
  }
  std::vector<Hit> hits(ids_.size());
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    double s = 0;
    const float* v = data_.data() + i * dim_;
    for (int c = 0; c < dim_; ++c) {
      const double d = static_cast<double>(v[c]) - query[static_cast<std::size_t>(c)];
      s += d * d;
    }
    hits[i] = {ids_[i], static_cast<float>(std::sqrt(s))};
  }
  auto less = [](const Hit& a, const Hit& b) {
    if (a.distance != b.distance) return a.distance < b.distance;
    return a.scene_id < b.scene_id;
  };
  std::partial_sort(hits.begin(), hits.begin() + k, hits.end(), less);
  hits.resize(static_cast<std::size_t>(k));
  return hits;
}

namespace {

void put_u32(std::string& out, std::uint32_t v) {
  char b[4];
  std::memcpy(b, &v, 4);
  out.append(b, 4);
}

std::uint32_t get_u32(const std::string& in, std::size_t& pos) {
  if (pos + 4 > in.size()) throw Error("index file truncated");
  std::uint32_t v;
  std::memcpy(&v, in.data() + pos, 4);
  pos += 4;
  return v;
}

}  // namespace

void EmbeddingIndex::save(const std::filesystem::path& path) const {
  std::string out = "SDIX";
  put_u32(out, static_cast<std::uint32_t>(ids_.size()));
  put_u32(out, static_cast<std::uint32_t>(dim_));
  out.append(reinterpret_cast<const char*>(data_.data()), data_.size() * sizeof(float));
  for (const auto& id : ids_) {
    put_u32(out, static_cast<std::uint32_t>(id.size()));
    out += id;
  }
  write_file(path, out);
}

EmbeddingIndex EmbeddingIndex::load(const std::filesystem::path& path) {
  const std::string in = read_file(path);
  if (in.substr(0, 4) != "SDIX") throw Error("index file: bad magic in " + path.string());
  std::size_t pos = 4;
  const std::uint32_t count = get_u32(in, pos);
  const std::uint32_t dim = get_u32(in, pos);
  const std::size_t bytes = static_cast<std::size_t>(count) * dim * sizeof(float);
  if (pos + bytes > in.size()) throw Error("index file truncated");
  std::vector<float> data(static_cast<std::size_t>(count) * dim);
  std::memcpy(data.data(), in.data() + pos, bytes);
  pos += bytes;
  EmbeddingIndex index(static_cast<int>(dim));
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint32_t len = get_u32(in, pos);
    if (pos + len > in.size()) throw Error("index file truncated");
    const std::string id = in.substr(pos, len);
    pos += len;
    index.add(id, {data.begin() + static_cast<std::ptrdiff_t>(i) * dim,
                   data.begin() + static_cast<std::ptrdiff_t>(i + 1) * dim});
  }
  return index;
}

RetrievalReport evaluate_retrieval(const EmbeddingIndex& index, const std::vector<Query>& queries,
                                   const std::vector<int>& ks, const ClassTable& classes) {
  if (index.size() == 0) throw Error("evaluate_retrieval: empty index");
  RetrievalReport report;
  std::map<int, double> hit_count, relevant_count;
  for (const auto& q : queries) {
    if (q.paired_scene_id.empty() || !index.find(q.paired_scene_id)) {
      ++report.excluded;
      continue;
    }
    ++report.evaluated;
    const auto hits = index.search(q.embedding, static_cast<int>(index.size()));
    int rank = 0;
    for (std::size_t r = 0; r < hits.size(); ++r)
      if (hits[r].scene_id == q.paired_scene_id) {
        rank = static_cast<int>(r) + 1;
        break;
      }
    report.ranks.push_back(rank);
    std::vector<int> qc = q.classes;
    std::sort(qc.begin(), qc.end());
    for (int k : ks) {
      if (rank <= k) hit_count[k] += 1;
      if (!classes.empty()) {
        int rel = 0;
        const int top = std::min<int>(k, static_cast<int>(hits.size()));
        for (int r = 0; r < top; ++r) {
          auto it = classes.find(hits[static_cast<std::size_t>(r)].scene_id);
          if (it == classes.end()) continue;
          std::vector<int> hc = it->second;
          std::sort(hc.begin(), hc.end());
          rel += hc == qc;
        }
        relevant_count[k] += static_cast<double>(rel) / top;
      }
    }
  }
  for (int k : ks) {
    report.recall[k] = report.evaluated ? hit_count[k] / report.evaluated : 0.0;
    if (!classes.empty()) report.precision[k] = report.evaluated ? relevant_count[k] / report.evaluated : 0.0;
  }
  return report;
}

}  // namespace sks::retrieval
