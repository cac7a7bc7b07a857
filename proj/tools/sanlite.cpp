#include <cstdio>
#include <string>

#include <CLI11.hpp>

#include "san/pipeline.hpp"

namespace {

struct CommonArgs {
  std::string config_path;
  std::string preset = "desk";
  std::string out_dir;
  std::string stream_mode;
  int64_t seed = -1;
  bool seed_given = false;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "pipeline config JSON")->required();
  cmd->add_option("--preset", args.preset, "base defaults: desk|paper")
      ->check(CLI::IsMember({"desk", "paper"}));
  cmd->add_option("--out", args.out_dir, "output directory (overrides config)");
  cmd->add_option("--stream-mode", args.stream_mode,
                  "detector input mode (overrides config)")
      ->check(CLI::IsMember({"two-stream", "original-only", "aggregated-only"}));
  cmd->add_option("--seed", args.seed, "master seed (overrides config)");
}

san::PipelineConfig build_config(const CommonArgs& args) {
  san::PipelineConfig cfg =
      san::PipelineConfig::from_json_file(args.config_path, args.preset);
  if (args.seed >= 0) {
    cfg.seed = static_cast<uint64_t>(args.seed);
    cfg.seed_set = true;
  }
  if (!args.out_dir.empty()) cfg.out_dir = args.out_dir;
  if (!args.stream_mode.empty())
    cfg.detector.stream_mode = san::stream_mode_from_name(args.stream_mode);
  cfg.validate();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sanlite: style-aggregated facial landmark detection pipeline"};
  app.require_subcommand(1);

  struct Sub {
    const char* name;
    const char* desc;
    void (*run)(const san::PipelineConfig&);
  };
  const Sub subs[] = {
      {"synth-data", "generate the procedural synthetic face dataset", san::pipe::run_synth},
      {"stylize", "apply the light/gray/sketch filters to the dataset", san::pipe::run_stylize},
      {"discover", "train the style classifier and cluster hidden styles",
       san::pipe::run_discover},
      {"train-gan", "train cycle-consistent generators on the selected cluster pair",
       san::pipe::run_train_gan},
      {"aggregate", "precompute style-aggregated images", san::pipe::run_aggregate},
      {"train-detector", "train the cascaded belief-map landmark detector",
       san::pipe::run_train_detector},
      {"evaluate", "evaluate the trained detector on the test split", san::pipe::run_evaluate},
      {"cross-style", "train/test NME over all 16 style combinations",
       san::pipe::run_cross_style},
      {"report", "re-render CSV/SVG reports from saved results", san::pipe::run_report},
  };

  CommonArgs args;
  std::string running = "cli";
  std::vector<std::pair<CLI::App*, const Sub*>> wired;
  for (const Sub& s : subs) {
    CLI::App* cmd = app.add_subcommand(s.name, s.desc);
    add_common(cmd, args);
    wired.emplace_back(cmd, &s);
  }
  CLI::App* pipeline_cmd =
      app.add_subcommand("pipeline", "run every stage in order with cached intermediates");
  add_common(pipeline_cmd, args);
  bool resume = false;
  pipeline_cmd->add_flag("--resume", resume, "skip stages whose outputs are unchanged");

  CLI11_PARSE(app, argc, argv);

  try {
    const san::PipelineConfig cfg = build_config(args);
    san::pipe::apply_thread_cap(cfg.threads);
    if (pipeline_cmd->parsed()) {
      running = "pipeline";
      san::pipe::run_pipeline(cfg, resume);
    } else {
      for (auto& [cmd, sub] : wired) {
        if (cmd->parsed()) {
          running = sub->name;
          sub->run(cfg);
          break;
        }
      }
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s: %s\n", running.c_str(), e.what());
    return 1;
  }
  return 0;
}
