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

#include "sketchscene/pipeline/checkpoint.hpp"

#include <bit>
#include <cstring>

#include "sketchscene/common.hpp"
#include "sketchscene/image_io.hpp"

namespace sks::pipeline {

static_assert(std::endian::native == std::endian::little, "checkpoints are written in native little-endian order");

namespace {

constexpr std::string_view kMagic = "SDCKPT1\n";

bool matches(const std::string& name, const std::vector<std::string>& prefixes) {
  if (prefixes.empty()) return true;
  for (const auto& p : prefixes)
    if (name.compare(0, p.size(), p) == 0) return true;
  return false;
}

}  // namespace

void Checkpoint::apply(diff::ParameterSet<float>& into, const std::vector<std::string>& prefixes) const {
  for (auto* p : into.all()) {
    if (!matches(p->name, prefixes)) continue;
    auto it = params.find(p->name);
    if (it == params.end()) throw Error("checkpoint has no parameter '" + p->name + "'");
    if (it->second.shape != p->shape)
      throw Error("checkpoint parameter '" + p->name + "' has shape " + diff::shape_str(it->second.shape) +
                  ", model expects " + diff::shape_str(p->shape));
    p->value = it->second.values;
  }
}

Checkpoint capture(const diff::ParameterSet<float>& params, const std::vector<std::string>& prefixes) {
  Checkpoint c;
  for (const auto* p : params.all())
    if (matches(p->name, prefixes)) c.params[p->name] = {p->shape, p->value};
  return c;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  nlohmann::json header;
  header["config_hash"] = ckpt.config_hash;
  header["stage"] = ckpt.stage;
  header["step"] = ckpt.step;
  header["num_classes"] = ckpt.num_classes;
  header["config"] = ckpt.config;
  header["params"] = nlohmann::json::array();
  std::size_t offset = 0;
  for (const auto& [name, t] : ckpt.params) {
    if (t.values.size() != diff::numel(t.shape)) throw Error("checkpoint: '" + name + "' size does not match shape");
    header["params"].push_back({{"name", name}, {"shape", t.shape}, {"offset", offset}});
    offset += t.values.size();
  }
  const std::string h = header.dump();
  std::string out(kMagic);
  const std::uint64_t len = h.size();
  out.append(reinterpret_cast<const char*>(&len), sizeof(len));
  out += h;
  for (const auto& [name, t] : ckpt.params)
    out.append(reinterpret_cast<const char*>(t.values.data()), t.values.size() * sizeof(float));

  if (!path.parent_path().empty()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  write_file(tmp, out);
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw Error("checkpoint not found: " + path.string());
  const std::string in = read_file(path);
  if (in.compare(0, kMagic.size(), kMagic) != 0) throw Error("not a checkpoint file: " + path.string());
  std::size_t pos = kMagic.size();
  std::uint64_t len = 0;
  if (in.size() < pos + sizeof(len)) throw Error("checkpoint truncated: " + path.string());
  std::memcpy(&len, in.data() + pos, sizeof(len));
  pos += sizeof(len);
  if (in.size() < pos + len) throw Error("checkpoint truncated: " + path.string());
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(in.substr(pos, len));
  } catch (const nlohmann::json::exception& e) {
    throw Error("checkpoint header of " + path.string() + " is not valid JSON: " + e.what());
  }
  pos += len;
  const std::size_t payload = (in.size() - pos) / sizeof(float);

  Checkpoint c;
  c.config_hash = header.at("config_hash").get<std::string>();
  c.stage = header.at("stage").get<int>();
  c.step = header.at("step").get<std::int64_t>();
  c.num_classes = header.at("num_classes").get<int>();
  c.config = header.at("config");
  for (const auto& e : header.at("params")) {
    Checkpoint::Tensor t;
    t.shape = e.at("shape").get<diff::Shape>();
    const auto offset = e.at("offset").get<std::size_t>();
    const auto n = diff::numel(t.shape);
    if (offset + n > payload) throw Error("checkpoint payload truncated: " + path.string());
    t.values.resize(n);
    std::memcpy(t.values.data(), in.data() + pos + offset * sizeof(float), n * sizeof(float));
    c.params[e.at("name").get<std::string>()] = std::move(t);
  }
  return c;
}

std::string checkpoint_file_hash(const std::filesystem::path& path) {
  Fnv1a h;
  h.update(read_file(path));
  return h.hex();
}

}  // namespace sks::pipeline
