#pragma once

#include <optional>
#include <string>
#include <vector>

#include "san/classifier.hpp"
#include "san/cyclegan.hpp"
#include "san/dataset.hpp"
#include "san/detector.hpp"
#include "san/metrics.hpp"

namespace san {

struct MatrixConfig {
  int train_count = 110;
  int test_count = 44;
  int epochs = 10;
};

// Whole-pipeline configuration. Parsed from JSON with unknown keys rejected;
// CLI flags override file values, file values override preset defaults.
struct PipelineConfig {
  uint64_t seed = 0;
  bool seed_set = false;
  std::string out_dir = "runs/out";
  int threads = 0;  // 0 = library default; env SANLITE_THREADS caps this

  SynthParams synth;
  double train_fraction = 5.0 / 6.0;
  ClassifierConfig classifier;
  int kmeans_k = 3;
  CycleTrainConfig cycle;
  DetectorConfig detector;
  EvalConfig eval;
  MatrixConfig matrix;
  std::vector<std::string> aggregate_styles = {"original"};

  static PipelineConfig preset(const std::string& name);  // desk | paper
  static PipelineConfig from_json_file(const std::string& path, const std::string& preset_name);

  uint64_t stage_seed(const std::string& stage) const;
  void validate() const;
};

namespace pipe {

// Stage directories under out_dir.
struct Paths {
  std::string out;
  explicit Paths(const std::string& out_dir) : out(out_dir) {}
  std::string data() const { return out + "/data"; }
  std::string original() const { return out + "/data/original"; }
  std::string style_dir(const std::string& style) const { return out + "/data/" + style; }
  std::string discovery() const { return out + "/discovery"; }
  std::string gan() const { return out + "/gan"; }
  std::string aggregated(const std::string& style) const { return out + "/aggregated/" + style; }
  std::string detector() const { return out + "/detector"; }
  std::string eval() const { return out + "/eval"; }
  std::string matrix() const { return out + "/matrix"; }
  std::string state_file() const { return out + "/pipeline_state.json"; }
};

void run_synth(const PipelineConfig& cfg);
void run_stylize(const PipelineConfig& cfg);
void run_discover(const PipelineConfig& cfg);
void run_train_gan(const PipelineConfig& cfg);
void run_aggregate(const PipelineConfig& cfg);
void run_train_detector(const PipelineConfig& cfg);
void run_evaluate(const PipelineConfig& cfg);
void run_cross_style(const PipelineConfig& cfg);
void run_report(const PipelineConfig& cfg);

// Chains all stages; with resume=true, stages whose outputs exist and match
// the recorded content hashes are skipped.
void run_pipeline(const PipelineConfig& cfg, bool resume);

// Stage names in pipeline order.
const std::vector<std::string>& stage_names();

// Applies SANLITE_THREADS (and cfg.threads) to the OpenMP runtime.
void apply_thread_cap(int threads_from_config);

// Content hash of every regular file under a directory, order-independent
// of traversal by sorting paths.
uint64_t hash_tree(const std::string& dir);

// Loads the two cycle generators saved by the train-gan stage.
std::pair<Generator, Generator> load_generators(const PipelineConfig& cfg);

}  // namespace pipe

}  // namespace san
