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

#include "sketchscene/pipeline/train.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <fstream>

#include "sketchscene/diff/adam.hpp"
#include "sketchscene/layout/generators.hpp"
#include "sketchscene/olr/encoder.hpp"
#include "sketchscene/retrieval/contrastive.hpp"

namespace sks::pipeline {

namespace fs = std::filesystem;
using Tape = diff::Tape<float>;
using Var = diff::Var<float>;
using glyph::Composition;
using glyph::Domain;
using glyph::ObjectInstance;
using glyph::SceneKind;
using glyph::Split;

RunLock::RunLock(const fs::path& dir) : path_(dir / ".lock") {
  fs::create_directories(dir);
  const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
  if (fd < 0)
    throw Error("run directory " + dir.string() + " is locked by another training process (remove " +
                path_.string() + " if that process is gone)");
  const std::string pid = std::to_string(::getpid()) + "\n";
  [[maybe_unused]] auto n = ::write(fd, pid.data(), pid.size());
  ::close(fd);
}

RunLock::~RunLock() {
  std::error_code ec;
  fs::remove(path_, ec);
}

fs::path stage_checkpoint(const fs::path& run_dir, int stage) {
  return run_dir / ("stage" + std::to_string(stage) + ".ckpt");
}

std::unique_ptr<Model> load_model(const Checkpoint& ckpt) {
  const TrainConfig cfg = TrainConfig::from_json(ckpt.config);
  auto model = std::make_unique<Model>(ckpt.num_classes, cfg.ablations, cfg.seed);
  ckpt.apply(model->params());
  return model;
}

std::unique_ptr<Model> load_model(const fs::path& path) { return load_model(load_checkpoint(path)); }

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::vector<float> stack_masks(const std::vector<const Composition*>& scenes) {
  std::vector<float> v;
  for (const auto* s : scenes)
    for (const auto& o : s->objects) v.insert(v.end(), o.mask.begin(), o.mask.end());
  return v;
}

// Owns the run directory bookkeeping shared by all stages.
class StageRunner {
 public:
  StageRunner(int stage, const TrainConfig& cfg, const StageOptions& opt, int num_classes, int steps)
      : stage_(stage), cfg_(cfg), opt_(opt), steps_(steps), num_classes_(num_classes), lock_(opt.run_dir),
        log_(opt.run_dir / "train.log", std::ios::app), t0_(std::chrono::steady_clock::now()) {
    if (!log_) throw Error("cannot open training log in " + opt.run_dir.string());
  }

  fs::path checkpoint_path() const { return stage_checkpoint(opt_.run_dir, stage_); }

  void save(const Model& model, int step) {
    Checkpoint c = capture(model.params());
    c.config_hash = cfg_.hash();
    c.stage = stage_;
    c.step = step;
    c.num_classes = num_classes_;
    c.config = cfg_.to_json();
    save_checkpoint(c, checkpoint_path());
  }

  // Returns the step to start from (0 for a fresh run).
  int maybe_resume(Model& model) {
    if (!opt_.resume || !fs::exists(checkpoint_path())) return 0;
    const Checkpoint c = load_checkpoint(checkpoint_path());
    if (c.config_hash != cfg_.hash())
      throw Error("cannot resume stage " + std::to_string(stage_) + ": checkpoint config hash " + c.config_hash +
                  " differs from the current config hash " + cfg_.hash());
    if (c.stage != stage_) throw Error("cannot resume: checkpoint belongs to stage " + std::to_string(c.stage));
    c.apply(model.params());
    return static_cast<int>(c.step);
  }

  void record(const Model& model, int step, std::map<std::string, double> terms, double total) {
    if (!std::isfinite(total)) {
      throw TrainingAborted("stage " + std::to_string(stage_) + " step " + std::to_string(step) +
                            ": loss is not finite; last good checkpoint kept at " + checkpoint_path().string());
    }
    LossRecord r{stage_, step, total, std::move(terms), seconds_since(t0_)};
    nlohmann::json line = {{"stage", r.stage}, {"step", r.step}, {"total", r.total}, {"wall_time", r.wall_seconds}};
    for (const auto& [k, v] : r.terms) line[k] = v;
    log_ << line.dump() << '\n';
    if (step % cfg_.log_every == 0) log_.flush();
    if (opt_.on_step) opt_.on_step(r);
    trace_.push_back(std::move(r));
    if (step % cfg_.checkpoint_every == 0 || step == steps_) save(model, step);
  }

  StageResult finish() {
    log_.flush();
    return {checkpoint_path(), std::move(trace_), seconds_since(t0_)};
  }

  int steps() const { return steps_; }

 private:
  int stage_;
  const TrainConfig& cfg_;
  const StageOptions& opt_;
  int steps_;
  int num_classes_;
  RunLock lock_;
  std::ofstream log_;
  std::chrono::steady_clock::time_point t0_;
  std::vector<LossRecord> trace_;
};

diff::AdamOptions adam_options(const TrainConfig& cfg, double lr) {
  return {lr, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_epsilon};
}

// ---- stage 1 ---------------------------------------------------------------

StageResult run_stage1(const glyph::Dataset& data, const TrainConfig& cfg, const StageOptions& opt, int steps) {
  const int C = data.num_classes();
  const auto photos = data.select(Split::kTrain, SceneKind::kPhoto);
  const auto sketches = data.select(Split::kTrain, SceneKind::kSoftSketch);
  if (photos.empty() || sketches.empty()) throw Error("train_stage1: the train split has no object crops");
  std::vector<const Composition*> all(photos);
  all.insert(all.end(), sketches.begin(), sketches.end());
  const glyph::InstancePool pool(all, C);
  for (int c = 0; c < C; ++c)
    if (pool.of(Domain::kSketch, c).empty() || pool.of(Domain::kPhoto, c).empty())
      throw Error("train_stage1: class " + std::to_string(c) + " has no sketch or photo crops in the train split");

  Model model(C, cfg.ablations, cfg.seed);
  StageRunner run(1, cfg, opt, C, steps);
  const int start = run.maybe_resume(model);
  diff::Adam<float> adam(model.params().with_prefix({"olr."}), adam_options(cfg, cfg.stage1_lr));
  const float margin = static_cast<float>(cfg.triplet_margin);

  for (int step = start + 1; step <= steps; ++step) {
    Rng rng(cfg.seed * 1000003ULL + 0x51a9e1ULL + static_cast<std::uint64_t>(step));
    std::vector<const ObjectInstance*> a, p, n;
    std::vector<int> la, lp, ln;
    for (int b = 0; b < cfg.stage1_batch; ++b) {
      const int ca = rng.below(C);
      int cn = rng.below(C - 1);
      if (cn >= ca) ++cn;
      a.push_back(&pool.sample(Domain::kSketch, ca, rng));
      p.push_back(&pool.sample(Domain::kPhoto, ca, rng));
      n.push_back(&pool.sample(Domain::kPhoto, cn, rng));
      la.push_back(ca);
      lp.push_back(ca);
      ln.push_back(cn);
    }
    Tape tape;
    const auto& enc = model.encoder();
    auto ea = enc.encode(tape, a), ep = enc.encode(tape, p), en = enc.encode(tape, n);
    auto tri = olr::triplet_loss(ea, ep, en, margin);
    auto cce = olr::cce_loss(tape, enc, ea, ep, en, la, lp, ln);
    auto total = diff::add(tri, cce);
    const double value = total.item();
    if (std::isfinite(value)) {
      tape.backward(total);
      adam.step();
    }
    run.record(model, step, {{"triplet", tri.item()}, {"cce", cce.item()}}, value);
  }
  return run.finish();
}

// ---- stages 2 and 3 --------------------------------------------------------

struct SceneBatch {
  std::vector<const Composition*> sketches, photos, swaps;
};

class ScenePairSampler {
 public:
  ScenePairSampler(const glyph::Dataset& data, SceneKind sketch_kind)
      : data_(data), kind_(sketch_kind), photos_(data.select(Split::kTrain, SceneKind::kPhoto)),
        pool_(photos_, data.num_classes()) {
    if (photos_.empty()) throw Error("training: the train split has no photo scenes");
    for (const auto* p : photos_)
      if (data.sketches_of(p->scene_id, kind_).empty())
        throw Error("training: photo scene '" + p->scene_id + "' has no " + glyph::to_string(kind_) + " pair");
  }

  // B distinct photo scenes, each with one paired sketch and one freshly
  // synthesized swap negative. `storage` keeps the negatives alive.
  SceneBatch sample(int batch, Rng& rng, std::vector<Composition>& storage) const {
    if (batch > static_cast<int>(photos_.size())) batch = static_cast<int>(photos_.size());
    std::vector<int> picks;
    while (static_cast<int>(picks.size()) < batch) {
      const int k = rng.below(static_cast<int>(photos_.size()));
      if (std::find(picks.begin(), picks.end(), k) == picks.end()) picks.push_back(k);
    }
    SceneBatch b;
    storage.clear();
    storage.reserve(static_cast<std::size_t>(batch));
    for (int k : picks) {
      const Composition* photo = photos_[static_cast<std::size_t>(k)];
      const auto pairs = data_.sketches_of(photo->scene_id, kind_);
      b.photos.push_back(photo);
      b.sketches.push_back(pairs[static_cast<std::size_t>(rng.below(static_cast<int>(pairs.size())))]);
      storage.push_back(glyph::synthesize_swap_negative(*photo, pool_, rng));
    }
    for (const auto& s : storage) b.swaps.push_back(&s);
    return b;
  }

 private:
  const glyph::Dataset& data_;
  SceneKind kind_;
  std::vector<const Composition*> photos_;
  glyph::InstancePool pool_;
};

Var rows_of(Var x, int begin, int count) {
  std::vector<int> idx(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) idx[static_cast<std::size_t>(i)] = begin + i;
  return diff::gather_rows(x, idx);
}

int objects_in(const std::vector<const Composition*>& scenes) {
  int n = 0;
  for (const auto* s : scenes) n += static_cast<int>(s->objects.size());
  return n;
}

StageResult run_scene_stage(int stage, const glyph::Dataset& data, const TrainConfig& cfg, const StageOptions& opt,
                            int steps) {
  const int C = data.num_classes();
  const Ablations& ab = cfg.ablations;
  const ScenePairSampler sampler(data, stage == 2 ? SceneKind::kSoftSketch : SceneKind::kHardSketch);

  Model model(C, ab, cfg.seed);
  const fs::path init = opt.init ? *opt.init : stage_checkpoint(opt.run_dir, stage - 1);
  if (stage == 2) {
    if (!ab.no_pretraining) {
      if (!fs::exists(init))
        throw Error("stage 2 needs a stage-1 checkpoint (" + init.string() + ") unless no_pretraining is set");
      load_checkpoint(init).apply(model.params(), {"olr."});
    }
  } else {
    if (!fs::exists(init)) throw Error("stage 3 needs a stage-2 checkpoint: " + init.string() + " not found");
    const Checkpoint c = load_checkpoint(init);
    if (c.stage != 2) throw Error("stage 3 must start from a stage-2 checkpoint, got stage " + std::to_string(c.stage));
    c.apply(model.params());
  }

  StageRunner run(stage, cfg, opt, C, steps);
  const int start = run.maybe_resume(model);
  const double lr = stage == 2 ? cfg.stage2_lr : cfg.stage3_lr;

  std::vector<diff::Parameter<float>*> gen_params, disc_params;
  for (auto* p : model.params().all()) {
    if (p->name.rfind("disc.", 0) == 0) {
      disc_params.push_back(p);
    } else if (!(ab.freeze_olr && p->name.rfind("olr.", 0) == 0)) {
      gen_params.push_back(p);
    }
  }
  diff::Adam<float> gen_opt(gen_params, adam_options(cfg, lr));
  diff::Adam<float> disc_opt(disc_params, adam_options(cfg, lr * cfg.ttur_factor));

  const layout::LossWeights w{cfg.lambda1, cfg.lambda2, cfg.lambda3, cfg.lambda4, cfg.lambda5};
  retrieval::ContrastiveOptions copt;
  copt.clamped = !ab.unclamped_contrastive;
  copt.swap_negatives = !ab.no_swap_negatives;
  const float margin = static_cast<float>(cfg.triplet_margin);
  const bool object_losses = !ab.freeze_olr;
  const bool generation = !ab.no_generation_losses;

  std::vector<Composition> storage;
  for (int step = start + 1; step <= steps; ++step) {
    Rng rng(cfg.seed * 1000003ULL + 0x5ce4e0ULL * static_cast<std::uint64_t>(stage) + static_cast<std::uint64_t>(step));
    const SceneBatch batch = sampler.sample(cfg.stage2_batch, rng, storage);
    const int B = static_cast<int>(batch.photos.size());
    std::vector<const Composition*> scenes(batch.sketches);
    scenes.insert(scenes.end(), batch.photos.begin(), batch.photos.end());
    scenes.insert(scenes.end(), batch.swaps.begin(), batch.swaps.end());
    const int n = objects_in(batch.photos);

    Tape tape;
    const auto f = model.forward(tape, scenes);
    std::map<std::string, double> terms;
    std::vector<Var> losses;

    if (object_losses) {
      auto a = rows_of(f.olr, 0, n), p = rows_of(f.olr, n, n), neg = rows_of(f.olr, 2 * n, n);
      const std::vector<int> ys(f.classes.begin(), f.classes.begin() + n);
      const std::vector<int> yn(f.classes.begin() + 2 * n, f.classes.begin() + 3 * n);
      auto tri = olr::triplet_loss(a, p, neg, margin);
      auto cce = olr::cce_loss(tape, model.encoder(), a, p, neg, ys, ys, yn);
      terms["triplet"] = tri.item();
      terms["cce"] = cce.item();
      losses.push_back(tri);
      losses.push_back(cce);
    }
    if (!ab.no_contrastive) {
      auto xs = rows_of(f.sr, 0, B), xi = rows_of(f.sr, B, B), xsn = rows_of(f.sr, 2 * B, B);
      auto cont = retrieval::contrastive_loss(tape, xs, xi, &xsn, copt);
      terms["contrastive"] = cont.item();
      losses.push_back(cont);
    }

    std::vector<float> generated_masks;
    std::vector<float> truth_masks;
    std::vector<int> mask_classes;
    if (generation) {
      const std::vector<int> classes(f.classes.begin() + n, f.classes.begin() + 2 * n);
      const std::vector<glyph::BBox> boxes(f.boxes.begin() + n, f.boxes.begin() + 2 * n);
      auto truth_box = tape.constant({n, 4}, layout::box_rows(boxes));
      truth_masks = stack_masks(batch.photos);
      auto truth_mask = tape.constant({n, glyph::kCropPixels}, truth_masks);
      double box_total = 0, mask_total = 0, cls_total = 0;
      for (int d = 0; d < 2; ++d) {  // sketch-derived then photo-derived FCR
        auto fcr = rows_of(f.fcr, d * n, n);
        auto box = layout::box_loss(model.box_generator()(tape, fcr), truth_box, w);
        auto gm = model.mask_generator()(tape, fcr);
        auto mask = layout::mask_generator_loss(tape, model.discriminator(), gm, truth_mask, classes, w);
        auto cls = model.fcr_classifier().loss(tape, fcr, classes);
        box_total += box.item();
        mask_total += mask.item();
        cls_total += cls.item();
        losses.insert(losses.end(), {box, mask, cls});
        generated_masks.insert(generated_masks.end(), gm.value().begin(), gm.value().end());
      }
      terms["box"] = box_total;
      terms["mask_gen"] = mask_total;
      terms["fcr_cce"] = cls_total;
      mask_classes = classes;
      mask_classes.insert(mask_classes.end(), classes.begin(), classes.end());
    }
    if (losses.empty()) throw Error("training: every loss is disabled by the ablation flags");
    auto total = diff::add_all(losses);
    const double value = total.item();
    if (std::isfinite(value)) {
      tape.backward(total);
      gen_opt.step();
      if (generation) {
        Tape dtape;
        std::vector<float> truth2(truth_masks);
        truth2.insert(truth2.end(), truth_masks.begin(), truth_masks.end());
        auto truth = dtape.constant({2 * n, glyph::kCropPixels}, std::move(truth2));
        auto dl = layout::mask_discriminator_loss(dtape, model.discriminator(), generated_masks, truth, mask_classes);
        terms["disc"] = dl.item();
        if (std::isfinite(dl.item())) {
          dtape.backward(dl);
          disc_opt.step();
        }
      }
    }
    run.record(model, step, std::move(terms), value);
  }
  return run.finish();
}

}  // namespace

StageResult train_stage(int stage, const glyph::Dataset& data, const TrainConfig& config, const StageOptions& options) {
  config.validate();
  if (stage < 1 || stage > 3) throw Error("stage must be 1, 2 or 3, got " + std::to_string(stage));
  if (data.scenes.empty()) throw Error("training: empty dataset");
  if (options.run_dir.empty()) throw Error("training: no run directory given");
  const int configured = stage == 1 ? config.stage1_steps : stage == 2 ? config.stage2_steps : config.stage3_steps;
  const int steps = options.steps > 0 ? options.steps : configured;
  if (stage == 1) return run_stage1(data, config, options, steps);
  return run_scene_stage(stage, data, config, options, steps);
}

}  // namespace sks::pipeline
