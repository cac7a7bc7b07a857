#include <doctest.h>

#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "san/pipeline.hpp"

using namespace san;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("san_cli_" + std::to_string(::getpid()) + "_" +
                                        std::to_string(reinterpret_cast<uintptr_t>(this)));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::string write_config(const fs::path& dir, const std::string& body) {
  const std::string path = (dir / "config.json").string();
  std::ofstream f(path);
  f << body;
  return path;
}

// fast tiny-scale config exercising every stage
std::string tiny_config_json(const fs::path& out_dir) {
  return std::string(R"({
 "seed": 11,
 "out_dir": ")") +
         out_dir.string() + R"(",
 "train_fraction": 0.75,
 "synth": {"count": 8, "image_size": 48},
 "classifier": {"input_size": 16, "feature_dim": 16, "epochs": 1, "batch": 4},
 "kmeans_k": 3,
 "cycle": {"image_size": 16, "iterations": 2, "batch": 2, "base_channels": 4,
           "res_blocks": 1, "disc_channels": 4, "log_interval": 1},
 "detector": {"input_size": 16, "feature_channels": [4,4,4,6], "head_channels": 6,
              "epochs": 1, "batch": 4, "lr_drop_epochs": []},
 "matrix": {"train_count": 3, "test_count": 2, "epochs": 1}
})";
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(SANLITE_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  return std::system(cmd.c_str());
}

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("config: unknown keys are rejected by name") {
  TempDir tmp;
  const std::string path = write_config(
      tmp.path, R"({"seed": 1, "out_dir": "x", "bogus_key": 3})");
  CHECK_THROWS_WITH_AS(PipelineConfig::from_json_file(path, "desk"),
                       doctest::Contains("bogus_key"), std::runtime_error);
  const std::string nested = write_config(
      tmp.path, R"({"seed": 1, "detector": {"learning_rate": 0.1}})");
  CHECK_THROWS_WITH_AS(PipelineConfig::from_json_file(nested, "desk"),
                       doctest::Contains("detector.learning_rate"), std::runtime_error);
}

TEST_CASE("config: a seed is mandatory") {
  TempDir tmp;
  const std::string path = write_config(tmp.path, R"({"out_dir": "x"})");
  PipelineConfig cfg = PipelineConfig::from_json_file(path, "desk");
  CHECK_THROWS_WITH_AS(cfg.validate(), doctest::Contains("seed"), std::runtime_error);
}

TEST_CASE("config: presets provide defaults, file overrides them") {
  TempDir tmp;
  const std::string path =
      write_config(tmp.path, R"({"seed": 3, "detector": {"epochs": 7}})");
  PipelineConfig desk = PipelineConfig::from_json_file(path, "desk");
  CHECK(desk.detector.epochs == 7);
  PipelineConfig paper = PipelineConfig::from_json_file(path, "paper");
  CHECK(paper.detector.epochs == 7);                 // file wins
  CHECK(paper.detector.lr == doctest::Approx(5e-5));  // preset value kept
  CHECK(paper.detector.lr_drop_epochs == std::vector<int>{30, 35, 40, 45});
  CHECK_THROWS(PipelineConfig::preset("nope"));
}

TEST_CASE("stage seeds differ per stage and stay stable") {
  PipelineConfig cfg;
  cfg.seed = 42;
  cfg.seed_set = true;
  CHECK(cfg.stage_seed("synth-data") != cfg.stage_seed("stylize"));
  CHECK(cfg.stage_seed("synth-data") == cfg.stage_seed("synth-data"));
}

TEST_CASE("cli: invalid config key fails with nonzero exit") {
  TempDir tmp;
  const std::string bad = write_config(tmp.path, R"({"seed": 1, "wrong": true})");
  CHECK(run_cli("synth-data --config " + bad) != 0);
  CHECK(run_cli("synth-data --config " + (tmp.path / "missing.json").string()) != 0);
  CHECK(run_cli("definitely-not-a-subcommand") != 0);
}

TEST_CASE("cli: full tiny pipeline runs, is idempotent, and resumes from cache") {
  TempDir tmp;
  const fs::path out = tmp.path / "out";
  const std::string cfg_path = write_config(tmp.path, tiny_config_json(out));

  REQUIRE(run_cli("pipeline --config " + cfg_path) == 0);
  pipe::Paths paths(out.string());
  CHECK(fs::exists(paths.original() + "/train.json"));
  CHECK(fs::exists(paths.style_dir("sketch") + "/test.json"));
  CHECK(fs::exists(paths.discovery() + "/pair.json"));
  CHECK(fs::exists(paths.gan() + "/g_ab.ckpt"));
  CHECK(fs::exists(paths.aggregated("original") + "/train.json"));
  CHECK(fs::exists(paths.detector() + "/model.ckpt"));
  CHECK(fs::exists(paths.eval() + "/result.json"));
  CHECK(fs::exists(paths.eval() + "/ced.svg"));
  CHECK(fs::exists(paths.state_file()));

  // re-running stylize over unchanged inputs is byte-identical
  const DatasetManifest sketch_train =
      read_manifest(paths.style_dir("sketch") + "/train.json");
  const std::string sample = sketch_train.resolve(sketch_train.records[0].image_path);
  const std::string before = slurp(sample);
  REQUIRE(run_cli("stylize --config " + cfg_path) == 0);
  CHECK(slurp(sample) == before);

  // determinism of the detector stage given the same seed
  const std::string ckpt = paths.detector() + "/model.ckpt";
  const std::string ckpt_before = slurp(ckpt);
  REQUIRE(run_cli("train-detector --config " + cfg_path) == 0);
  CHECK(slurp(ckpt) == ckpt_before);

  // resume skips everything (all hashes unchanged)
  REQUIRE(run_cli("pipeline --resume --config " + cfg_path) == 0);
  CHECK(slurp(ckpt) == ckpt_before);
}
