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

// Three-stage training. Stage 1 fits the object encoder alone, stage 2 the
// whole model on soft-paired scenes, stage 3 finetunes on hard pairs.
//
// A run directory holds stage{1,2,3}.ckpt, train.log (NDJSON, one line per
// step) and a lock file that keeps a second trainer out.

#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "sketchscene/glyph/dataset.hpp"
#include "sketchscene/pipeline/checkpoint.hpp"
#include "sketchscene/pipeline/config.hpp"
#include "sketchscene/pipeline/model.hpp"

namespace sks::pipeline {

using Model = SceneModel<float>;

struct LossRecord {
  int stage = 0;
  int step = 0;  // 1-based
  double total = 0;
  std::map<std::string, double> terms;
  double wall_seconds = 0;
};

struct StageOptions {
  std::filesystem::path run_dir;
  // Checkpoint to initialize from: stage 1 output for stage 2, stage 2
  // output for stage 3. Defaults to the previous stage inside run_dir.
  std::optional<std::filesystem::path> init;
  // Continue from run_dir/stage{N}.ckpt when it exists.
  bool resume = false;
  // Overrides the configured step count when positive.
  int steps = 0;
  std::function<void(const LossRecord&)> on_step;
};

struct StageResult {
  std::filesystem::path checkpoint;
  std::vector<LossRecord> trace;
  double seconds = 0;
};

class TrainingAborted : public Error {
 public:
  using Error::Error;
};

std::filesystem::path stage_checkpoint(const std::filesystem::path& run_dir, int stage);

StageResult train_stage(int stage, const glyph::Dataset& data, const TrainConfig& config, const StageOptions& options);

// Model with the configured ablations, parameters copied from `ckpt`.
std::unique_ptr<Model> load_model(const Checkpoint& ckpt);
std::unique_ptr<Model> load_model(const std::filesystem::path& path);

// Directory lock held for the lifetime of the object (O_EXCL lock file).
class RunLock {
 public:
  explicit RunLock(const std::filesystem::path& dir);
  ~RunLock();
  RunLock(const RunLock&) = delete;
  RunLock& operator=(const RunLock&) = delete;

 private:
  std::filesystem::path path_;
};

}  // namespace sks::pipeline
