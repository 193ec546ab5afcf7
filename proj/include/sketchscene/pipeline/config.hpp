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

// Training configuration. Serialized as a flat JSON object; unknown keys
// are rejected on load.

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "json.hpp"

namespace sks::pipeline {

struct Ablations {
  bool no_transformer = false;          // A1: SR = sum of CCR, FCR = CCR
  bool no_gnn = false;                  // A2: CCR = linear+ReLU of OLR
  bool no_positional_encoding = false;  // A3: E = 0
  bool no_pretraining = false;          // B1: stage 2 starts from random OLR weights
  bool no_swap_negatives = false;       // B2: drop the x_sn term
  bool no_contrastive = false;          // C1: drop the scene contrastive loss
  bool no_generation_losses = false;    // C2: drop box, mask, FCR-class losses
  bool freeze_olr = false;              // stage 2/3 keep OLR weights fixed
  bool plain_attention = false;         // literal attention layers
  bool unclamped_contrastive = false;   // literal, unbounded negative terms

  bool operator==(const Ablations&) const = default;
};

struct TrainConfig {
  std::uint64_t seed = 0;
  bool paper_defaults = false;

  int stage1_steps = 2000;
  int stage2_steps = 5000;
  int stage3_steps = 500;
  int stage1_batch = 32;
  int stage2_batch = 8;

  double stage1_lr = 1e-4;
  double stage2_lr = 1e-4;
  double stage3_lr = 1e-5;
  double ttur_factor = 4.0;
  double adam_beta1 = 0.5;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-9;

  double triplet_margin = 0.5;
  double lambda1 = 10.0;
  double lambda2 = 10.0;
  double lambda3 = 10.0;
  double lambda4 = 0.25;
  double lambda5 = 10.0;

  int log_every = 50;
  int checkpoint_every = 500;

  Ablations ablations;

  // Full-scale iteration counts (100K / 120K / 5K); everything else is
  // already at the published constants.
  static TrainConfig full_scale();

  void validate() const;
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
  static TrainConfig load(const std::filesystem::path& path);
  std::string hash() const;
};

}  // namespace sks::pipeline
