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

#include "sketchscene/pipeline/config.hpp"

#include <set>

#include "sketchscene/common.hpp"
#include "sketchscene/image_io.hpp"

namespace sks::pipeline {

using nlohmann::json;

TrainConfig TrainConfig::full_scale() {
  TrainConfig c;
  c.paper_defaults = true;
  c.stage1_steps = 100000;
  c.stage2_steps = 120000;
  c.stage3_steps = 5000;
  return c;
}

void TrainConfig::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0)) throw Error(std::string("config: ") + name + " must be positive");
  };
  if (stage1_steps < 0 || stage2_steps < 0 || stage3_steps < 0) throw Error("config: step counts must be >= 0");
  positive(stage1_batch, "stage1_batch");
  positive(stage2_batch, "stage2_batch");
  positive(stage1_lr, "stage1_lr");
  positive(stage2_lr, "stage2_lr");
  positive(stage3_lr, "stage3_lr");
  positive(ttur_factor, "ttur_factor");
  positive(adam_epsilon, "adam_epsilon");
  positive(triplet_margin, "triplet_margin");
  positive(lambda1, "lambda1");
  positive(lambda2, "lambda2");
  positive(lambda3, "lambda3");
  positive(lambda4, "lambda4");
  positive(lambda5, "lambda5");
  positive(log_every, "log_every");
  positive(checkpoint_every, "checkpoint_every");
  if (!(adam_beta1 >= 0 && adam_beta1 < 1) || !(adam_beta2 >= 0 && adam_beta2 < 1))
    throw Error("config: Adam betas must lie in [0, 1)");
}

json TrainConfig::to_json() const {
  const Ablations& a = ablations;
  return json{{"seed", seed},
              {"paper_defaults", paper_defaults},
              {"stage1_steps", stage1_steps},
              {"stage2_steps", stage2_steps},
              {"stage3_steps", stage3_steps},
              {"stage1_batch", stage1_batch},
              {"stage2_batch", stage2_batch},
              {"stage1_lr", stage1_lr},
              {"stage2_lr", stage2_lr},
              {"stage3_lr", stage3_lr},
              {"ttur_factor", ttur_factor},
              {"adam_beta1", adam_beta1},
              {"adam_beta2", adam_beta2},
              {"adam_epsilon", adam_epsilon},
              {"triplet_margin", triplet_margin},
              {"lambda1", lambda1},
              {"lambda2", lambda2},
              {"lambda3", lambda3},
              {"lambda4", lambda4},
              {"lambda5", lambda5},
              {"log_every", log_every},
              {"checkpoint_every", checkpoint_every},
              {"no_transformer", a.no_transformer},
              {"no_gnn", a.no_gnn},
              {"no_positional_encoding", a.no_positional_encoding},
              {"no_pretraining", a.no_pretraining},
              {"no_swap_negatives", a.no_swap_negatives},
              {"no_contrastive", a.no_contrastive},
              {"no_generation_losses", a.no_generation_losses},
              {"freeze_olr", a.freeze_olr},
              {"plain_attention", a.plain_attention},
              {"unclamped_contrastive", a.unclamped_contrastive}};
}

TrainConfig TrainConfig::from_json(const json& j) {
  if (!j.is_object()) throw Error("config: expected a JSON object");
  const json defaults = TrainConfig{}.to_json();
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!defaults.contains(it.key())) throw Error("config: unknown key '" + it.key() + "'");
  // paper_defaults switches the baseline before explicit keys apply.
  TrainConfig c = j.value("paper_defaults", false) ? full_scale() : TrainConfig{};
  json merged = c.to_json();
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (it.value().type() != merged[it.key()].type() &&
        !(it.value().is_number() && merged[it.key()].is_number()))
      throw Error("config: key '" + it.key() + "' has the wrong type");
    merged[it.key()] = it.value();
  }
  try {
    c.seed = merged["seed"].get<std::uint64_t>();
    c.paper_defaults = merged["paper_defaults"];
    c.stage1_steps = merged["stage1_steps"];
    c.stage2_steps = merged["stage2_steps"];
    c.stage3_steps = merged["stage3_steps"];
    c.stage1_batch = merged["stage1_batch"];
    c.stage2_batch = merged["stage2_batch"];
    c.stage1_lr = merged["stage1_lr"];
    c.stage2_lr = merged["stage2_lr"];
    c.stage3_lr = merged["stage3_lr"];
    c.ttur_factor = merged["ttur_factor"];
    c.adam_beta1 = merged["adam_beta1"];
    c.adam_beta2 = merged["adam_beta2"];
    c.adam_epsilon = merged["adam_epsilon"];
    c.triplet_margin = merged["triplet_margin"];
    c.lambda1 = merged["lambda1"];
    c.lambda2 = merged["lambda2"];
    c.lambda3 = merged["lambda3"];
    c.lambda4 = merged["lambda4"];
    c.lambda5 = merged["lambda5"];
    c.log_every = merged["log_every"];
    c.checkpoint_every = merged["checkpoint_every"];
    Ablations& a = c.ablations;
    a.no_transformer = merged["no_transformer"];
    a.no_gnn = merged["no_gnn"];
    a.no_positional_encoding = merged["no_positional_encoding"];
    a.no_pretraining = merged["no_pretraining"];
    a.no_swap_negatives = merged["no_swap_negatives"];
    a.no_contrastive = merged["no_contrastive"];
    a.no_generation_losses = merged["no_generation_losses"];
    a.freeze_olr = merged["freeze_olr"];
    a.plain_attention = merged["plain_attention"];
    a.unclamped_contrastive = merged["unclamped_contrastive"];
  } catch (const json::exception& e) {
    throw Error(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

TrainConfig TrainConfig::load(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw Error("config: cannot parse " + path.string() + ": " + e.what());
  }
  return from_json(j);
}

std::string TrainConfig::hash() const { return hash_hex(to_json().dump()); }

}  // namespace sks::pipeline
