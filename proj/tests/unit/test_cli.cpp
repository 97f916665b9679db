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

#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "partgen/scene_io.hpp"
#include "partgen/tools/cli.hpp"
#include "test_models.hpp"
#include "test_util.hpp"

namespace partgen::tools {
namespace {

struct CliResult {
  int code;
  std::string out;
  std::string err;
};

CliResult run(std::vector<std::string> args) {
  args.insert(args.begin(), "partgen");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out;
  std::ostringstream err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

nlohmann::json last_error(const CliResult& r) {
  std::istringstream in(r.err);
  std::string line;
  std::string last;
  while (std::getline(in, line)) {
    if (!line.empty()) last = line;
  }
  return nlohmann::json::parse(last);
}

class CliTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    ckpt_ = new std::filesystem::path(testing_util::temp_dir("cli_ckpt"));
    testing_util::tiny_models(51, 6).save(*ckpt_);
  }
  static void TearDownTestSuite() { delete ckpt_; }
  static std::filesystem::path* ckpt_;
};
std::filesystem::path* CliTest::ckpt_ = nullptr;

TEST_F(CliTest, SynthDataIsDeterministic) {
  const auto a = testing_util::temp_dir("cli_synth_a");
  const auto b = testing_util::temp_dir("cli_synth_b");
  for (const auto& dir : {a, b}) {
    const CliResult r = run({"synth-data", "--n", "3", "--seed", "5", "--grid", "16", "--out", dir.string()});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(nlohmann::json::parse(r.out)["samples"], 3);
  }
  EXPECT_EQ(testing_util::hash_tree(a), testing_util::hash_tree(b));
  EXPECT_EQ(read_manifest(a).grid, 16);
}

TEST_F(CliTest, GenerateTwiceIsByteIdentical) {
  const auto root = testing_util::temp_dir("cli_gen");
  for (const char* name : {"a", "b"}) {
    const CliResult r = run({"generate", "--checkpoint", ckpt_->string(), "--category", "table", "--sample-seed", "3",
                             "--seed", "7", "--steps", "3", "--gt-boxes", "--out", (root / name).string()});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto j = nlohmann::json::parse(r.out);
    EXPECT_EQ(j["scene_id"], "table-00000003-7");
    EXPECT_EQ(j["layout_source"], "ground_truth");
  }
  EXPECT_EQ(testing_util::hash_tree(root / "a"), testing_util::hash_tree(root / "b"));
}

TEST_F(CliTest, EditAndEvalCommands) {
  const auto root = testing_util::temp_dir("cli_edit");
  ASSERT_EQ(run({"generate", "--checkpoint", ckpt_->string(), "--category", "lamp", "--steps", "2", "--gt-boxes",
                 "--out", (root / "scene").string()})
                .code,
            0);
  const SceneState s = read_scene(root / "scene");
  std::ofstream(root / "req.json") << nlohmann::json{{"version", 1}, {"frozen", {s.parts[0].part_id}}, {"seed", 4}};
  const CliResult e = run({"edit", "--checkpoint", ckpt_->string(), "--steps", "2", "--scene",
                           (root / "scene").string(), "--request", (root / "req.json").string(), "--out",
                           (root / "edited").string()});
  ASSERT_EQ(e.code, 0) << e.err;
  EXPECT_EQ(read_scene(root / "edited").parts[0].grid, s.parts[0].grid);

  const CliResult ev = run({"eval", "--scene", (root / "scene").string()});
  ASSERT_EQ(ev.code, 0) << ev.err;
  const auto report = nlohmann::json::parse(ev.out);
  EXPECT_EQ(report["samples"].size(), 1u);
  EXPECT_FALSE(report["samples"][0]["part_chamfer"].is_null());
  EXPECT_EQ(run({"eval", "--table", "--scene", (root / "scene").string()}).code, 0);

  std::ofstream(root / "bad.json") << R"({"version": 1, "ops": [{"op": "delete", "part_id": 99}]})";
  const CliResult bad = run({"edit", "--checkpoint", ckpt_->string(), "--scene", (root / "scene").string(),
                             "--request", (root / "bad.json").string()});
  EXPECT_EQ(bad.code, 1);
  EXPECT_EQ(last_error(bad)["op_index"], 0);
  EXPECT_EQ(last_error(bad)["error"], "invalid_argument");
}

TEST_F(CliTest, EvalOnGeneratedLayoutIsNotApplicable) {
  const auto root = testing_util::temp_dir("cli_na");
  ASSERT_EQ(run({"generate", "--checkpoint", ckpt_->string(), "--category", "robot", "--steps", "2", "--gt-boxes",
                 "--out", (root / "scene").string()})
                .code,
            0);
  // Relabel the layout as sampled.
  SceneState s = read_scene(root / "scene");
  s.layout_source = "generated";
  write_scene(root / "scene", s);
  const CliResult r = run({"eval", "--scene", (root / "scene").string()});
  EXPECT_EQ(r.code, 3);
  EXPECT_EQ(last_error(r)["error"], "not_applicable");
  const CliResult g = run({"eval", "--global-only", "--scene", (root / "scene").string()});
  EXPECT_EQ(g.code, 0) << g.err;
  EXPECT_TRUE(nlohmann::json::parse(g.out)["samples"][0]["part_chamfer"].is_null());
}

TEST_F(CliTest, ExitCodes) {
  EXPECT_EQ(run({"--help"}).code, 0);
  EXPECT_EQ(run({"generate"}).code, 2);  // missing --category
  EXPECT_EQ(run({"no-such-command"}).code, 2);
  const CliResult missing = run({"generate", "--checkpoint", "/nonexistent/ckpt", "--category", "chair"});
  EXPECT_EQ(missing.code, 4);
  EXPECT_EQ(last_error(missing)["error"], "not_found");
  EXPECT_EQ(last_error(missing)["version"], 1);
  EXPECT_EQ(run({"generate", "--checkpoint", ckpt_->string(), "--category", "sofa"}).code, 1);
  EXPECT_EQ(run({"generate", "--checkpoint", ckpt_->string(), "--category", "chair", "--grid", "32"}).code, 2);
  EXPECT_EQ(run({"eval", "--scene", "/nonexistent/scene"}).code, 4);
  const auto dir = testing_util::temp_dir("cli_cfg");
  std::ofstream(dir / "bad.cfg") << "coarse.dpeth = 4\n";
  const CliResult cfg = run({"synth-data", "--config", (dir / "bad.cfg").string(), "--out", (dir / "d").string()});
  EXPECT_EQ(cfg.code, 2);
  EXPECT_NE(last_error(cfg)["message"].get<std::string>().find("coarse.dpeth"), std::string::npos);
  EXPECT_EQ(run({"train-coarse", "--data", "/nonexistent/data"}).code, 4);
}

TEST_F(CliTest, TrainCommandWritesCheckpoint) {
  const auto root = testing_util::temp_dir("cli_train");
  ASSERT_EQ(run({"synth-data", "--n", "2", "--grid", "16", "--out", (root / "data").string()}).code, 0);
  std::ofstream(root / "tiny.cfg") << "refine.depth = 2\nrefine.width = 16\nrefine.heads = 2\nrefine.time_dim = 8\n"
                                      "refine.train.batch = 1\nrefine.budget = 16\n";
  const CliResult r = run({"train-refine", "--config", (root / "tiny.cfg").string(), "--data",
                           (root / "data").string(), "--iters", "2", "--out", (root / "ckpt").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(std::filesystem::exists(root / "ckpt" / kRefineCheckpoint));
  const RefineModel m = load_refine_model(root / "ckpt" / kRefineCheckpoint);
  EXPECT_EQ(m.opts.grid, 16);
  EXPECT_EQ(m.config.width, 16);
  // The manifest fixes the grid; a conflicting flag is a config error.
  EXPECT_EQ(run({"train-refine", "--config", (root / "tiny.cfg").string(), "--data", (root / "data").string(),
                 "--iters", "1", "--grid", "32", "--out", (root / "ckpt2").string()})
                .code,
            2);
}

}  // namespace
}  // namespace partgen::tools
