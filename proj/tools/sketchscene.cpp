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

// sketchscene command line: dataset synthesis, training, indexing, search,
// layout generation, evaluation and the HTTP service.

#include <atomic>
#include <chrono>
#include <csignal>
#include <iostream>
#include <thread>

#include "CLI11.hpp"
#include "sketchscene/image_io.hpp"
#include "sketchscene/layout/compose.hpp"
#include "sketchscene/pipeline/eval.hpp"
#include "sketchscene/serve/service.hpp"

namespace {

namespace fs = std::filesystem;
using namespace sks;
using nlohmann::json;

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;

  pipeline::TrainConfig train_config() const {
    auto c = config.empty() ? pipeline::TrainConfig{} : pipeline::TrainConfig::load(config);
    if (seed) c.seed = *seed;
    c.validate();
    return c;
  }
};

void emit(const json& j, const std::string& out) {
  const std::string text = j.dump(2) + "\n";
  if (out.empty() || out == "-") {
    std::cout << text;
  } else {
    write_file(out, text);
    std::cerr << "wrote " << out << "\n";
  }
}

// A query composition: a corpus scene id, or a request JSON file in the
// service's CompositionRequest format.
glyph::Composition query_composition(const glyph::Dataset& data, const std::string& scene_id,
                                     const std::string& request_file, int num_classes) {
  if (!scene_id.empty() == !request_file.empty()) throw Error("give exactly one of --scene and --request");
  if (!scene_id.empty()) return data.scene(scene_id);
  json j;
  try {
    j = json::parse(read_file(request_file));
  } catch (const json::parse_error& e) {
    throw Error(request_file + ": " + e.what());
  }
  return serve::parse_composition(j, &data, num_classes);
}

std::atomic<int> g_signal{0};
extern "C" void on_signal(int sig) { g_signal = sig; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sketchscene: sketch-driven scene retrieval and layout synthesis"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags may follow the subcommand
  Globals g;
  app.add_option("--config", g.config, "training config JSON")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "RNG seed (dataset seed for synth-data, training seed otherwise)");

  // synth-data
  auto* synth = app.add_subcommand("synth-data", "generate the synthetic glyph-world dataset");
  std::string synth_out;
  glyph::DatasetConfig dcfg;
  synth->add_option("--out", synth_out, "output directory")->required();
  synth->add_option("--classes", dcfg.num_classes, "number of glyph classes");
  synth->add_option("--train-scenes", dcfg.train_scenes);
  synth->add_option("--val-scenes", dcfg.val_scenes);
  synth->add_option("--test-scenes", dcfg.test_scenes);

  // train
  auto* train = app.add_subcommand("train", "run one training stage");
  int stage = 0, steps = 0;
  std::string data_dir, run_dir, init;
  bool resume = false;
  train->add_option("--stage", stage, "1: object pretraining, 2: scene training, 3: hard-pair finetune")
      ->required()
      ->check(CLI::Range(1, 3));
  train->add_option("--data", data_dir, "dataset directory")->required()->check(CLI::ExistingDirectory);
  train->add_option("--run-dir", run_dir, "checkpoint and log directory")->required();
  train->add_option("--steps", steps, "override the configured step count");
  train->add_option("--init", init, "checkpoint to start from (default: previous stage in --run-dir)");
  train->add_flag("--resume", resume, "continue from this stage's checkpoint");

  // build-index
  auto* index_cmd = app.add_subcommand("build-index", "embed the photo scenes of a split");
  std::string checkpoint, index_out, split_name = "test";
  index_cmd->add_option("--checkpoint", checkpoint)->required()->check(CLI::ExistingFile);
  index_cmd->add_option("--data", data_dir)->required()->check(CLI::ExistingDirectory);
  index_cmd->add_option("--split", split_name, "train|val|test");
  index_cmd->add_option("--out", index_out)->required();

  // search
  auto* search = app.add_subcommand("search", "nearest corpus scenes for a query composition");
  std::string index_file, scene_id, request_file, out;
  int k = serve::kDefaultK;
  search->add_option("--checkpoint", checkpoint)->required()->check(CLI::ExistingFile);
  search->add_option("--index", index_file)->required()->check(CLI::ExistingFile);
  search->add_option("--data", data_dir)->required()->check(CLI::ExistingDirectory);
  search->add_option("--scene", scene_id, "corpus scene id to use as the query");
  search->add_option("--request", request_file, "CompositionRequest JSON file")->check(CLI::ExistingFile);
  search->add_option("-k", k)->check(CLI::PositiveNumber);
  search->add_option("--out", out, "JSON result file (default stdout)");

  // generate
  auto* generate = app.add_subcommand("generate", "synthesize a layout for a composition");
  std::string out_prefix;
  std::optional<int> background;
  generate->add_option("--checkpoint", checkpoint)->required()->check(CLI::ExistingFile);
  generate->add_option("--data", data_dir)->required()->check(CLI::ExistingDirectory);
  generate->add_option("--scene", scene_id);
  generate->add_option("--request", request_file)->check(CLI::ExistingFile);
  generate->add_option("--background", background)->check(CLI::Range(0, glyph::kBackgroundCount - 1));
  generate->add_option("--out", out_prefix, "writes PREFIX.pgm, PREFIX.ppm and PREFIX.json")->required();

  // eval
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint and write a JSON report");
  std::string task;
  eval->add_option("--task", task)->required()->check(CLI::IsMember({"objects", "retrieval", "generation"}));
  eval->add_option("--checkpoint", checkpoint)->required()->check(CLI::ExistingFile);
  eval->add_option("--data", data_dir)->required()->check(CLI::ExistingDirectory);
  eval->add_option("--split", split_name);
  eval->add_option("--out", out, "report file (default stdout)");

  // serve
  auto* serve_cmd = app.add_subcommand("serve", "HTTP service for the composition UI");
  serve::ServerOptions sopt;
  std::string serve_index;
  serve_cmd->add_option("--addr", sopt.addr);
  serve_cmd->add_option("--port", sopt.port)->check(CLI::Range(0, 65535));
  serve_cmd->add_option("--cors-origin", sopt.cors_origin);
  serve_cmd->add_option("--checkpoint", checkpoint)->required()->check(CLI::ExistingFile);
  serve_cmd->add_option("--data", data_dir)->required()->check(CLI::ExistingDirectory);
  serve_cmd->add_option("--index", serve_index, "index file (default: built from --split)")->check(CLI::ExistingFile);
  serve_cmd->add_option("--split", split_name);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    const glyph::Split split = glyph::parse_split(split_name);

    if (synth->parsed()) {
      const auto data = glyph::generate_dataset(g.seed.value_or(0), dcfg);
      glyph::write_dataset(data, synth_out);
      emit({{"dir", synth_out}, {"scenes", data.scenes.size()}, {"hash", glyph::hash_directory(synth_out)}}, "");
      return 0;
    }

    if (train->parsed()) {
      const auto cfg = g.train_config();
      const auto data = glyph::load_dataset(data_dir);
      pipeline::StageOptions opt;
      opt.run_dir = run_dir;
      opt.resume = resume;
      opt.steps = steps;
      if (!init.empty()) opt.init = init;
      opt.on_step = [&](const pipeline::LossRecord& r) {
        if (cfg.log_every > 0 && r.step % cfg.log_every == 0)
          std::cerr << "stage " << r.stage << " step " << r.step << " loss " << r.total << "\n";
      };
      const auto res = pipeline::train_stage(stage, data, cfg, opt);
      emit({{"checkpoint", res.checkpoint.string()},
            {"checkpoint_hash", pipeline::checkpoint_file_hash(res.checkpoint)},
            {"steps", res.trace.empty() ? 0 : res.trace.back().step},
            {"final_loss", res.trace.empty() ? 0.0 : res.trace.back().total},
            {"seconds", res.seconds}},
           "");
      return 0;
    }

    if (index_cmd->parsed()) {
      const auto model = pipeline::load_model(checkpoint);
      const auto data = glyph::load_dataset(data_dir, split);
      const auto index = pipeline::build_index(*model, data.select(split, glyph::SceneKind::kPhoto));
      index.save(index_out);
      emit({{"index", index_out}, {"size", index.size()}, {"dim", index.dim()}}, "");
      return 0;
    }

    if (search->parsed()) {
      const auto model = pipeline::load_model(checkpoint);
      const auto data = glyph::load_dataset(data_dir);
      const auto index = retrieval::EmbeddingIndex::load(index_file);
      const auto query = query_composition(data, scene_id, request_file, model->num_classes());
      json rows = json::array();
      int rank = 1;
      for (const auto& hit : index.search(model->embed({&query})[0], k))
        rows.push_back({{"rank", rank++}, {"scene_id", hit.scene_id}, {"distance", hit.distance}});
      emit({{"query", scene_id.empty() ? request_file : scene_id}, {"k", k}, {"results", rows}}, out);
      return 0;
    }

    if (generate->parsed()) {
      const auto model = pipeline::load_model(checkpoint);
      const auto data = glyph::load_dataset(data_dir);
      const auto query = query_composition(data, scene_id, request_file, model->num_classes());
      const auto s = pipeline::synthesize(*model, query, background ? background : query.background);
      write_file(out_prefix + ".pgm", encode_pgm(layout::layout_to_gray(s.layout)));
      write_file(out_prefix + ".ppm",
                 encode_ppm(layout::colorize(s.layout, model->num_classes() + glyph::kBackgroundCount)));
      json boxes = json::array();
      for (const auto& b : s.boxes) boxes.push_back({b.x0, b.y0, b.x1, b.y1});
      emit({{"boxes", boxes}, {"pgm", out_prefix + ".pgm"}, {"ppm", out_prefix + ".ppm"}}, out_prefix + ".json");
      return 0;
    }

    if (eval->parsed()) {
      const auto model = pipeline::load_model(checkpoint);
      const auto data = glyph::load_dataset(data_dir);
      json report;
      if (task == "objects") report = pipeline::evaluate_objects(*model, data, split).to_json();
      if (task == "retrieval") report = pipeline::evaluate_retrieval_task(*model, data, split, g.seed.value_or(0)).to_json();
      if (task == "generation") report = pipeline::evaluate_generation(*model, data, split).to_json();
      report["task"] = task;
      report["split"] = split_name;
      report["checkpoint_hash"] = pipeline::checkpoint_file_hash(checkpoint);
      emit(report, out);
      return 0;
    }

    if (serve_cmd->parsed()) {
      auto load = [&] {
        return serve::load_snapshot(checkpoint, data_dir,
                                    serve_index.empty() ? std::nullopt : std::optional<fs::path>(serve_index), split);
      };
      serve::Service service(load());
      serve::HttpServer server(service, sopt);
      const int port = server.bind();
      std::cerr << "listening on http://" << sopt.addr << ":" << port << " (checkpoint "
                << service.snapshot()->checkpoint_hash << ")\n";
      std::signal(SIGHUP, on_signal);
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      std::atomic<bool> running{true};
      // SIGHUP reloads checkpoint, index and dataset from the same paths.
      std::thread watcher([&] {
        while (running) {
          const int sig = g_signal.exchange(0);
          if (sig == SIGHUP) {
            try {
              service.load(load());
              std::cerr << "reloaded (checkpoint " << service.snapshot()->checkpoint_hash << ")\n";
            } catch (const std::exception& e) {
              std::cerr << "reload failed, keeping the old snapshot: " << e.what() << "\n";
            }
          } else if (sig != 0) {
            server.stop();
            return;
          }
          std::this_thread::sleep_for(std::chrono::milliseconds(100));
        }
      });
      server.listen();
      running = false;
      watcher.join();
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
