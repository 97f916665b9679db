// Copyright 2026 The PartGen Authors
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

#include "partgen/tools/cli.hpp"

#include <CLI11.hpp>

#include <csignal>
#include <nlohmann/json.hpp>
#include <optional>

#include "partgen/config.hpp"
#include "partgen/error.hpp"
#include "partgen/eval.hpp"
#include "partgen/scene_io.hpp"
#include "partgen/synthdata.hpp"
#include "partgen/tools/server.hpp"
#include "partgen/tools/settings.hpp"
#include "partgen/tools/training.hpp"
#include "partgen/voxel.hpp"

namespace partgen::tools {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Flags shared by every command; each maps onto a config key.
struct CommonFlags {
  std::string config;
  std::optional<uint64_t> seed;
  std::string out;
  std::string checkpoint;
  std::optional<int> steps;
  std::optional<double> cfg_scale;
  std::optional<double> nms_iou;
  std::optional<int> kmax;
  std::optional<int> grid;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config, "Flat key=value config file");
  cmd->add_option("--seed", f.seed, "Seed");
  cmd->add_option("--out", f.out, "Output path");
  cmd->add_option("--checkpoint", f.checkpoint, "Checkpoint directory");
  cmd->add_option("--steps", f.steps, "Sampler steps");
  cmd->add_option("--cfg-scale", f.cfg_scale, "Classifier-free guidance scale (default 3.5)");
  cmd->add_option("--nms-iou", f.nms_iou, "Layout NMS IoU threshold (default 0.7)");
  cmd->add_option("--kmax", f.kmax, "Parts per sampling round (default 30)");
  cmd->add_option("--grid", f.grid, "Occupancy grid resolution (default 64)");
}

Config load_config(const CommonFlags& f, const char* seed_key = "seed") {
  Config cfg = f.config.empty() ? Config() : Config::load(f.config);
  if (f.seed) cfg.set(seed_key, std::to_string(*f.seed));
  if (!f.checkpoint.empty()) cfg.set("checkpoint_dir", f.checkpoint);
  if (f.steps) cfg.set("steps", std::to_string(*f.steps));
  if (f.cfg_scale) cfg.set("cfg_scale", std::to_string(*f.cfg_scale));
  if (f.nms_iou) cfg.set("nms_iou", std::to_string(*f.nms_iou));
  if (f.kmax) cfg.set("kmax", std::to_string(*f.kmax));
  if (f.grid) cfg.set("grid", std::to_string(*f.grid));
  return cfg;
}

int exit_code(ErrorCode code) {
  switch (code) {
    case ErrorCode::kConfig: return 2;
    case ErrorCode::kNotApplicable: return 3;
    case ErrorCode::kNotFound: return 4;
    default: return 1;
  }
}

void error_line(std::ostream& err, std::string_view code, const std::string& message) {
  err << json{{"version", 1}, {"error", code}, {"message", message}}.dump() << "\n";
}

std::vector<ObjectSample> load_corpus(const fs::path& dir, Config& cfg) {
  const DatasetManifest manifest = read_manifest(dir);
  if (!cfg.has("grid")) {
    cfg.set("grid", std::to_string(manifest.grid));
  } else if (cfg.get_int("grid", 0) != manifest.grid) {
    throw Error(ErrorCode::kConfig, "invalid value for 'grid': dataset " + dir.string() + " was built at grid " +
                                        std::to_string(manifest.grid));
  }
  return load_samples(manifest);
}

Models load_models(const Settings& s, const Config& cfg) {
  Models m = Models::load(s.checkpoint_dir);
  if (cfg.has("grid") && s.grid != m.coarse.opts.grid) {
    throw Error(ErrorCode::kConfig, "invalid value for 'grid': checkpoint was trained at grid " +
                                        std::to_string(m.coarse.opts.grid));
  }
  return m;
}

ApiServer* g_server = nullptr;
void on_signal(int) {
  if (g_server) g_server->stop();
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Part-aware 3D generation: data, training, sampling, editing, evaluation"};
  app.name("partgen");
  app.require_subcommand(1);

  CommonFlags f;

  auto* synth = app.add_subcommand("synth-data", "Build a synthetic training corpus");
  add_common(synth, f);
  std::optional<int> n;
  synth->add_option("--n", n, "Number of samples");

  CLI::App* train_cmds[3];
  const char* stage_names[3] = {"layout", "coarse", "refine"};
  std::string data;
  std::optional<int> iters;
  for (int i = 0; i < 3; ++i) {
    train_cmds[i] = app.add_subcommand(std::string("train-") + stage_names[i],
                                       std::string("Train the ") + stage_names[i] + " stage");
    add_common(train_cmds[i], f);
    train_cmds[i]->add_option("--data", data, "Dataset directory (overrides data_dir)");
    train_cmds[i]->add_option("--iters", iters, "Training iterations");
  }

  auto* gen = app.add_subcommand("generate", "Generate a part-aware scene");
  add_common(gen, f);
  std::string category;
  uint64_t sample_seed = 0;
  bool gt_boxes = false;
  std::string scene_id;
  gen->add_option("--category", category, "Condition category")->required();
  gen->add_option("--sample-seed", sample_seed, "Seed of the condition object");
  gen->add_flag("--gt-boxes", gt_boxes, "Use the condition object's part boxes instead of sampling a layout");
  gen->add_option("--scene-id", scene_id, "Scene id (default derived from condition and seed)");

  auto* edit = app.add_subcommand("edit", "Apply an edit request to a scene");
  add_common(edit, f);
  std::string scene_dir;
  std::string request;
  edit->add_option("--scene", scene_dir, "Scene directory")->required();
  edit->add_option("--request", request, "Edit request JSON file")->required();

  auto* ev = app.add_subcommand("eval", "Evaluate scenes against their condition objects");
  add_common(ev, f);
  std::vector<std::string> scenes;
  bool global_only = false;
  bool table = false;
  ev->add_option("--scene", scenes, "Scene directories")->required();
  ev->add_flag("--global-only", global_only, "Skip Part-CD instead of failing when it is not applicable");
  ev->add_flag("--table", table, "Print an aligned table instead of JSON");

  auto* serve = app.add_subcommand("serve", "Run the HTTP job API");
  add_common(serve, f);
  std::optional<std::string> host;
  std::optional<int> port;
  std::optional<int> workers;
  std::string store;
  std::string static_dir;
  serve->add_option("--host", host, "Bind address");
  serve->add_option("--port", port, "Port");
  serve->add_option("--workers", workers, "Concurrent sampling jobs");
  serve->add_option("--store", store, "Scene store directory");
  serve->add_option("--static", static_dir, "Directory of editor assets to serve at /");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    error_line(err, "usage", e.what());
    return 2;
  }

  try {
    if (synth->parsed()) {
      Config cfg = load_config(f, "synth.seed");
      if (n) cfg.set("synth.n", std::to_string(*n));
      if (!cfg.has("grid")) cfg.set("grid", "64");
      const Settings s = Settings::from_config(cfg);
      const fs::path dir = f.out.empty() ? s.data_dir : fs::path(f.out);
      const DatasetManifest m = build_dataset(s.synth_seed, s.synth_categories, s.synth_n, s.grid, dir);
      out << json{{"version", 1}, {"command", "synth-data"}, {"samples", m.samples.size()}, {"out", dir.string()}}.dump()
          << "\n";
      return 0;
    }

    for (int i = 0; i < 3; ++i) {
      if (!train_cmds[i]->parsed()) continue;
      Config cfg = load_config(f);
      if (iters) cfg.set(std::string(stage_names[i]) + ".train.iters", std::to_string(*iters));
      const fs::path data_path = data.empty() ? data_dir(cfg) : fs::path(data);
      const std::vector<ObjectSample> corpus = load_corpus(data_path, cfg);
      const Settings s = Settings::from_config(cfg);
      const fs::path dir = f.out.empty() ? s.checkpoint_dir : fs::path(f.out);
      fs::create_directories(dir);
      TrainLog log{&err, 100};
      fs::path file;
      if (i == 0) {
        file = dir / kLayoutCheckpoint;
        save_model(train_layout(corpus, s, log), file);
      } else if (i == 1) {
        file = dir / kCoarseCheckpoint;
        save_model(train_coarse(corpus, s, log), file);
      } else {
        file = dir / kRefineCheckpoint;
        save_model(train_refine(corpus, s, log), file);
      }
      out << json{{"version", 1}, {"command", train_cmds[i]->get_name()}, {"checkpoint", file.string()}}.dump()
          << "\n";
      return 0;
    }

    if (gen->parsed()) {
      const Config cfg = load_config(f);
      const Settings s = Settings::from_config(cfg);
      require_category(category);
      Models models = load_models(s, cfg);
      const ConditionRef cond{category, sample_seed};
      const std::string id = scene_id.empty() ? default_scene_id(cond, s.seed) : scene_id;
      if (!valid_scene_id(id)) throw Error(ErrorCode::kInvalidArgument, "invalid scene id '" + id + "'");
      SceneState state;
      if (gt_boxes) {
        const auto boxes = generate_sample(cond.seed, cond.category).boxes();
        state = generate_from_boxes(models, cond, boxes, s.seed, s.pipeline_options(), id);
      } else {
        state = run_full(models, cond, s.seed, s.pipeline_options(), id);
      }
      const fs::path dir = f.out.empty() ? s.store_dir / id : fs::path(f.out);
      write_scene(dir, state);
      out << json{{"version", 1},
                  {"command", "generate"},
                  {"scene_id", id},
                  {"out", dir.string()},
                  {"parts", state.parts.size()},
                  {"layout_source", state.layout_source}}
                 .dump()
          << "\n";
      return 0;
    }

    if (edit->parsed()) {
      const Config cfg = load_config(f);
      const Settings s = Settings::from_config(cfg);
      const SceneState state = read_scene(scene_dir);
      json body;
      try {
        body = json::parse(read_file(request));
      } catch (const json::parse_error& e) {
        throw Error(ErrorCode::kFormat, request + ": " + e.what());
      }
      const EditRequest req = parse_edit(body);
      Models models = load_models(s, cfg);
      const SceneState next = edit_scene(models, state, req, s.pipeline_options());
      const fs::path dir = f.out.empty() ? fs::path(scene_dir) : fs::path(f.out);
      write_scene(dir, next);
      out << json{{"version", 1}, {"command", "edit"}, {"scene_id", next.scene_id}, {"out", dir.string()},
                  {"parts", next.parts.size()}}
                 .dump()
          << "\n";
      return 0;
    }

    if (ev->parsed()) {
      const Settings s = Settings::from_config(load_config(f));
      EvalReport report;
      report.options = s.eval;
      for (const std::string& dir : scenes) report.samples.push_back(evaluate_scene(read_scene(dir), s.eval, !global_only));
      const std::string text = table ? report.table() : report.to_json().dump(2) + "\n";
      if (f.out.empty()) {
        out << text;
      } else {
        write_file(f.out, std::span(reinterpret_cast<const uint8_t*>(text.data()), text.size()));
        out << json{{"version", 1}, {"command", "eval"}, {"out", f.out}}.dump() << "\n";
      }
      return 0;
    }

    if (serve->parsed()) {
      const Config cfg = load_config(f);
      Settings s = Settings::from_config(cfg);
      if (host) s.host = *host;
      if (port) s.port = *port;
      if (workers) s.workers = *workers;
      ServerOptions so;
      so.store_dir = store.empty() ? s.store_dir : fs::path(store);
      so.static_dir = static_dir;
      so.workers = s.workers;
      so.pipeline = s.pipeline_options();
      ApiServer server(so, [&] { return load_models(s, cfg); });
      g_server = &server;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      err << "serving on " << s.host << ":" << s.port << "\n";
      server.run(s.host, s.port);
      g_server = nullptr;
      return 0;
    }
  } catch (const EditError& e) {
    err << json{{"version", 1}, {"error", to_string(e.code())}, {"message", e.what()}, {"op_index", e.op_index()}}.dump()
        << "\n";
    return exit_code(e.code());
  } catch (const Error& e) {
    error_line(err, to_string(e.code()), e.what());
    return exit_code(e.code());
  } catch (const std::exception& e) {
    error_line(err, "internal", e.what());
    return 1;
  }
  return 0;
}

}  // namespace partgen::tools
