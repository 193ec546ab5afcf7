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

// Checkpoint file: "SDCKPT1\n", u64 LE header length, a JSON header
// {params: [{name, shape, offset}], config_hash, stage, step, num_classes,
// config}, then the float32 LE payload. Offsets count floats from the
// payload start.

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "sketchscene/diff/tape.hpp"

namespace sks::pipeline {

struct Checkpoint {
  struct Tensor {
    diff::Shape shape;
    std::vector<float> values;
  };

  std::string config_hash;
  int stage = 0;
  std::int64_t step = 0;
  int num_classes = 0;
  nlohmann::json config;
  std::map<std::string, Tensor> params;

  // Copies every parameter of `into` whose name starts with one of
  // `prefixes` (all when empty). Missing names or shape mismatches throw.
  void apply(diff::ParameterSet<float>& into, const std::vector<std::string>& prefixes = {}) const;
};

Checkpoint capture(const diff::ParameterSet<float>& params, const std::vector<std::string>& prefixes = {});

// Written to a sibling temp file and renamed, so readers never see a
// partial checkpoint.
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// FNV-1a of the file bytes, hex.
std::string checkpoint_file_hash(const std::filesystem::path& path);

}  // namespace sks::pipeline
