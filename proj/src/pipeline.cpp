#include "san/pipeline.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>

#include <nlohmann/json.hpp>
#ifdef _OPENMP
#include <omp.h>
#endif

#include "san/kmeans.hpp"
#include "san/report.hpp"

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace san {

namespace {

// strict JSON section reader: every visited key is ticked off, leftovers are
// reported by name
class Section {
 public:
  Section(const ordered_json& j, std::string where) : j_(j), where_(std::move(where)) {
    check(j.is_object(), "config: " + where_ + " must be an object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    if (j_.contains(key)) {
      try {
        out = j_.at(key).get<T>();
      } catch (const std::exception&) {
        throw std::runtime_error("config: bad value for '" + where_ + "." + key + "'");
      }
    }
    seen_.push_back(key);
  }

  bool has(const char* key) {
    seen_.push_back(key);
    return j_.contains(key);
  }

  const ordered_json& sub(const char* key) {
    seen_.push_back(key);
    return j_.at(key);
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (std::find(seen_.begin(), seen_.end(), it.key()) == seen_.end())
        throw std::runtime_error("config: unknown key '" + where_ + "." + it.key() + "'");
    }
  }

 private:
  const ordered_json& j_;
  std::string where_;
  std::vector<std::string> seen_;
};

}  // namespace

PipelineConfig PipelineConfig::preset(const std::string& name) {
  PipelineConfig cfg;
  if (name == "desk" || name.empty()) {
    return cfg;
  }
  if (name == "paper") {
    // recorded paper-scale settings; dataset sizes stay desk-scale
    cfg.detector = DetectorConfig::paper_preset();
    cfg.classifier.lr = 0.01;
    cfg.classifier.epochs = 2;
    cfg.cycle.batch = 32;
    cfg.cycle.lambda_identity_rel = 0.1;
    return cfg;
  }
  throw std::runtime_error("unknown preset '" + name + "' (expected desk|paper)");
}

PipelineConfig PipelineConfig::from_json_file(const std::string& path,
                                              const std::string& preset_name) {
  PipelineConfig cfg = preset(preset_name);
  std::ifstream f(path);
  check(f.good(), "config: cannot open '" + path + "'");
  ordered_json j;
  try {
    j = ordered_json::parse(f);
  } catch (const std::exception& e) {
    throw std::runtime_error("config: malformed JSON in '" + path + "': " + e.what());
  }

  Section root(j, "root");
  if (root.has("seed")) {
    cfg.seed = j.at("seed").get<uint64_t>();
    cfg.seed_set = true;
  }
  root.get("out_dir", cfg.out_dir);
  root.get("threads", cfg.threads);
  root.get("train_fraction", cfg.train_fraction);
  root.get("kmeans_k", cfg.kmeans_k);
  root.get("aggregate_styles", cfg.aggregate_styles);

  if (root.has("synth")) {
    Section s(root.sub("synth"), "synth");
    s.get("count", cfg.synth.count);
    s.get("image_size", cfg.synth.image_size);
    s.finish();
  }
  if (root.has("classifier")) {
    Section s(root.sub("classifier"), "classifier");
    s.get("input_size", cfg.classifier.input_size);
    s.get("feature_dim", cfg.classifier.feature_dim);
    s.get("epochs", cfg.classifier.epochs);
    s.get("lr", cfg.classifier.lr);
    s.get("momentum", cfg.classifier.momentum);
    s.get("batch", cfg.classifier.batch);
    s.finish();
  }
  if (root.has("cycle")) {
    Section s(root.sub("cycle"), "cycle");
    s.get("lambda_cycle", cfg.cycle.lambda_cycle);
    s.get("lambda_identity_rel", cfg.cycle.lambda_identity_rel);
    s.get("batch", cfg.cycle.batch);
    s.get("lr", cfg.cycle.lr);
    s.get("iterations", cfg.cycle.iterations);
    s.get("image_size", cfg.cycle.image_size);
    s.get("base_channels", cfg.cycle.base_channels);
    s.get("res_blocks", cfg.cycle.res_blocks);
    s.get("disc_channels", cfg.cycle.disc_channels);
    s.get("log_interval", cfg.cycle.log_interval);
    s.finish();
  }
  if (root.has("detector")) {
    Section s(root.sub("detector"), "detector");
    s.get("input_size", cfg.detector.input_size);
    s.get("K", cfg.detector.K);
    s.get("feature_channels", cfg.detector.feature_channels);
    s.get("convs_per_block", cfg.detector.convs_per_block);
    s.get("head_channels", cfg.detector.head_channels);
    s.get("sigma_gt", cfg.detector.sigma_gt);
    std::string mode = stream_mode_name(cfg.detector.stream_mode);
    s.get("stream_mode", mode);
    cfg.detector.stream_mode = stream_mode_from_name(mode);
    s.get("lr", cfg.detector.lr);
    s.get("weight_decay", cfg.detector.weight_decay);
    s.get("lr_drop_epochs", cfg.detector.lr_drop_epochs);
    s.get("lr_drop_factor", cfg.detector.lr_drop_factor);
    s.get("epochs", cfg.detector.epochs);
    s.get("batch", cfg.detector.batch);
    s.get("expand_ratio", cfg.detector.expand_ratio);
    s.get("augment", cfg.detector.augment);
    s.get("adam", cfg.detector.adam);
    s.finish();
  }
  if (root.has("eval")) {
    Section s(root.sub("eval"), "eval");
    std::string norm = normalizer_name(cfg.eval.normalizer);
    s.get("normalizer", norm);
    cfg.eval.normalizer = normalizer_from_name(norm);
    std::vector<int> io = {cfg.eval.interocular_left, cfg.eval.interocular_right};
    s.get("interocular_indices", io);
    check(io.size() == 2, "config: eval.interocular_indices must have 2 entries");
    cfg.eval.interocular_left = io[0];
    cfg.eval.interocular_right = io[1];
    s.get("ced_grid_max", cfg.eval.ced_grid_max);
    s.get("ced_grid_step", cfg.eval.ced_grid_step);
    s.get("auc_threshold", cfg.eval.auc_threshold);
    s.finish();
  }
  if (root.has("matrix")) {
    Section s(root.sub("matrix"), "matrix");
    s.get("train_count", cfg.matrix.train_count);
    s.get("test_count", cfg.matrix.test_count);
    s.get("epochs", cfg.matrix.epochs);
    s.finish();
  }
  root.finish();
  return cfg;
}

uint64_t PipelineConfig::stage_seed(const std::string& stage) const {
  return derive_seed(seed, stage);
}

void PipelineConfig::validate() const {
  check(seed_set, "config: a seed is required (set \"seed\" or pass --seed)");
  check(!out_dir.empty(), "config: out_dir must not be empty");
  check(train_fraction > 0.0 && train_fraction < 1.0, "config: train_fraction must be in (0,1)");
  check(kmeans_k >= 2, "config: kmeans_k must be >= 2");
  check(synth.count >= 4, "config: synth.count too small");
  detector.validate();
  for (const auto& s : aggregate_styles) {
    check(s == "original" || s == "light" || s == "gray" || s == "sketch",
          "config: unknown aggregate style '" + s + "'");
  }
}

namespace pipe {

void apply_thread_cap(int threads_from_config) {
#ifdef _OPENMP
  int cap = threads_from_config;
  if (const char* env = std::getenv("SANLITE_THREADS")) {
    const int env_cap = std::atoi(env);
    if (env_cap > 0) cap = cap > 0 ? std::min(cap, env_cap) : env_cap;
  }
  if (cap > 0) omp_set_num_threads(cap);
#else
  (void)threads_from_config;
#endif
}

const std::vector<std::string>& stage_names() {
  static const std::vector<std::string> names = {
      "synth-data", "stylize", "discover", "train-gan", "aggregate",
      "train-detector", "evaluate", "report"};
  return names;
}

namespace {

DatasetManifest load_manifest(const std::string& path) { return read_manifest(path); }

std::vector<DatasetManifest> styled_manifests(const PipelineConfig& cfg,
                                              const std::string& split) {
  Paths p(cfg.out_dir);
  std::vector<DatasetManifest> out;
  for (const std::string& s : StyleFilterSet::names())
    out.push_back(load_manifest(p.style_dir(s) + "/" + split + ".json"));
  return out;
}

std::vector<Tensor> cluster_crops(const DatasetManifest& mixed, const std::vector<int>& members,
                                  const PipelineConfig& cfg) {
  std::vector<Tensor> out(members.size());
#pragma omp parallel for schedule(dynamic)
  for (int64_t i = 0; i < static_cast<int64_t>(members.size()); ++i) {
    const auto& r = mixed.records[static_cast<size_t>(members[static_cast<size_t>(i)])];
    const RgbImage img = read_png(mixed.resolve(r.image_path));
    CropResult crop = crop_face(img, r.box, cfg.detector.expand_ratio, cfg.cycle.image_size);
    out[static_cast<size_t>(i)] = image_to_tensor(crop.image);
  }
  return out;
}

DatasetManifest mixed_train_manifest(const PipelineConfig& cfg) {
  return concat_manifests(styled_manifests(cfg, "train"), "mixed-train");
}

}  // namespace

void run_synth(const PipelineConfig& cfg) {
  Paths p(cfg.out_dir);
  fs::create_directories(p.original());
  DatasetManifest all = generate_synth_dataset(cfg.synth, cfg.stage_seed("synth-data"),
                                               p.original(), "synthetic-faces", "train");
  auto [train, test] = split_dataset(all, cfg.train_fraction, cfg.stage_seed("split"));
  train.name = "synthetic-faces-train";
  test.name = "synthetic-faces-test";
  write_manifest(train, p.original() + "/train.json");
  write_manifest(test, p.original() + "/test.json");
}

void run_stylize(const PipelineConfig& cfg) {
  Paths p(cfg.out_dir);
  for (const std::string& split : {"train", "test"}) {
    const DatasetManifest m = load_manifest(p.original() + "/" + split + ".json");
    generate_styled_dataset(m, p.data());
  }
}

void run_discover(const PipelineConfig& cfg) {
  Paths p(cfg.out_dir);
  fs::create_directories(p.discovery());
  const DatasetManifest original = load_manifest(p.original() + "/train.json");
  const std::vector<DatasetManifest> styled = styled_manifests(cfg, "train");

  ClassifierTrainResult trained = train_style_classifier(original, styled, cfg.classifier,
                                                         cfg.stage_seed("discover"));
  classifier_checkpoint(trained.model).save(p.discovery() + "/classifier.ckpt");

  const DatasetManifest mixed = mixed_train_manifest(cfg);
  auto features = extract_style_features(trained.model, mixed);
  l2_normalize(features);
  ClusterModel clusters = kmeans_cluster(features, cfg.kmeans_k, cfg.stage_seed("kmeans"));
  write_cluster_csv(clusters, features, p.discovery() + "/clusters.csv");

  const auto [a, b] = select_cluster_pair(clusters);
  std::vector<int> labels;
  for (const auto& r : mixed.records) {
    const auto& names = StyleFilterSet::names();
    const auto it = std::find(names.begin(), names.end(), r.style_tag);
    labels.push_back(it == names.end() ? 0 : static_cast<int>(it - names.begin()));
  }
  const double purity = cluster_purity(clusters.assignments, labels, cfg.kmeans_k);

  ordered_json out;
  out["classifier_train_accuracy"] = trained.train_accuracy;
  out["cluster_sizes"] = clusters.sizes();
  out["cluster_a"] = a;
  out["cluster_b"] = b;
  out["purity_vs_style_tags"] = purity;
  out["inertia"] = clusters.inertia;
  std::ofstream f(p.discovery() + "/pair.json", std::ios::trunc);
  f << out.dump(1) << "\n";
}

void run_train_gan(const PipelineConfig& cfg) {
  Paths p(cfg.out_dir);
  fs::create_directories(p.gan());

  // rebuild cluster membership from the discovery artifacts
  std::ifstream pf(p.discovery() + "/pair.json");
  check(pf.good(), "train-gan: run discover first (missing pair.json)");
  ordered_json pair_json = ordered_json::parse(pf);
  const int cluster_a = pair_json.at("cluster_a").get<int>();
  const int cluster_b = pair_json.at("cluster_b").get<int>();

  std::ifstream cf(p.discovery() + "/clusters.csv");
  check(cf.good(), "train-gan: missing clusters.csv");
  std::string line;
  std::getline(cf, line);  // header
  std::vector<int> assignment;
  while (std::getline(cf, line)) {
    const size_t c1 = line.find(',');
    const size_t c2 = line.find(',', c1 + 1);
    check(c1 != std::string::npos && c2 != std::string::npos, "train-gan: bad clusters.csv row");
    assignment.push_back(std::stoi(line.substr(c1 + 1, c2 - c1 - 1)));
  }

  const DatasetManifest mixed = mixed_train_manifest(cfg);
  check(assignment.size() == mixed.records.size(),
        "train-gan: clusters.csv does not match the mixed corpus");
  std::vector<int> members_a, members_b;
  for (size_t i = 0; i < assignment.size(); ++i) {
    if (assignment[i] == cluster_a) members_a.push_back(static_cast<int>(i));
    if (assignment[i] == cluster_b) members_b.push_back(static_cast<int>(i));
  }
  check(!members_a.empty() && !members_b.empty(), "train-gan: empty style cluster");

  CycleTrainConfig ccfg = cfg.cycle;
  ccfg.seed = cfg.stage_seed("train-gan");
  const auto images_a = cluster_crops(mixed, members_a, cfg);
  const auto images_b = cluster_crops(mixed, members_b, cfg);
  CycleTrainResult res = train_cycle_generators(images_a, images_b, ccfg);

  generator_checkpoint(res.g_ab).save(p.gan() + "/g_ab.ckpt");
  generator_checkpoint(res.g_ba).save(p.gan() + "/g_ba.ckpt");
  write_cycle_log_csv(res.log, p.gan() + "/cycle_log.csv");
}

std::pair<Generator, Generator> load_generators(const PipelineConfig& cfg) {
  Paths p(cfg.out_dir);
  Generator g_ab = generator_from_checkpoint(Checkpoint::load(p.gan() + "/g_ab.ckpt"),
                                             cfg.cycle.base_channels, cfg.cycle.res_blocks);
  Generator g_ba = generator_from_checkpoint(Checkpoint::load(p.gan() + "/g_ba.ckpt"),
                                             cfg.cycle.base_channels, cfg.cycle.res_blocks);
  return {std::move(g_ab), std::move(g_ba)};
}

void run_aggregate(const PipelineConfig& cfg) {
  Paths p(cfg.out_dir);
  auto [g_ab, g_ba] = load_generators(cfg);
  // g_ba maps toward cluster A's style, g_ab toward B's
  for (const std::string& style : cfg.aggregate_styles) {
    for (const std::string& split : {"train", "test"}) {
      const std::string src = style == "original" ? p.original() + "/" + split + ".json"
                                                  : p.style_dir(style) + "/" + split + ".json";
      const DatasetManifest m = load_manifest(src);
      precompute_aggregated_manifest(m, g_ba, g_ab, p.aggregated(style));
    }
  }
}

void run_train_detector(const PipelineConfig& cfg) {
  Paths p(cfg.out_dir);
  fs::create_directories(p.detector());
  const DatasetManifest train = load_manifest(p.original() + "/train.json");
  std::optional<DatasetManifest> agg;
  if (cfg.detector.stream_mode != StreamMode::OriginalOnly)
    agg = load_manifest(p.aggregated("original") + "/train.json");
  DetectorTrainResult res =
      train_detector(train, agg ? &*agg : nullptr, cfg.detector,
                     cfg.stage_seed("train-detector"));
  detector_checkpoint(res.model).save(p.detector() + "/model.ckpt");
  write_detector_log_csv(res.log, p.detector() + "/train_log.csv");
}

void run_evaluate(const PipelineConfig& cfg) {
  Paths p(cfg.out_dir);
  fs::create_directories(p.eval());
  const DetectorModel model =
      detector_from_checkpoint(cfg.detector, Checkpoint::load(p.detector() + "/model.ckpt"));
  const DatasetManifest test = load_manifest(p.original() + "/test.json");
  std::optional<DatasetManifest> agg;
  if (cfg.detector.stream_mode != StreamMode::OriginalOnly)
    agg = load_manifest(p.aggregated("original") + "/test.json");
  const EvalResult res = evaluate_detector(model, test, agg ? &*agg : nullptr, cfg.eval);
  const CedCurve ced = ced_curve(res.nmes, cfg.eval.ced_grid());
  const double auc = auc_at(ced, cfg.eval.auc_threshold);

  write_per_image_csv(res, p.eval() + "/per_image.csv");
  write_ced_svg({{res.detector_name, ced}}, p.eval() + "/ced.svg");
  ordered_json out;
  out["dataset"] = res.dataset_name;
  out["detector"] = res.detector_name;
  out["normalizer"] = res.normalizer;
  out["n_images"] = res.nmes.size();
  out["mean_nme"] = res.mean_nme();
  out["mean_nme_x100"] = res.mean_nme() * 100.0;
  out["auc_at_threshold"] = auc;
  out["auc_threshold"] = cfg.eval.auc_threshold;
  std::ofstream f(p.eval() + "/result.json", std::ios::trunc);
  f << out.dump(1) << "\n";
}

void run_cross_style(const PipelineConfig& cfg) {
  Paths p(cfg.out_dir);
  fs::create_directories(p.matrix());
  auto [g_ab, g_ba] = load_generators(cfg);

  const std::vector<std::string> all_styles = {"original", "light", "gray", "sketch"};
  std::vector<StyleSet> sets;
  for (const auto& style : all_styles) {
    StyleSet s;
    s.style = style;
    const std::string train_src = style == "original" ? p.original() + "/train.json"
                                                      : p.style_dir(style) + "/train.json";
    const std::string test_src = style == "original" ? p.original() + "/test.json"
                                                     : p.style_dir(style) + "/test.json";
    DatasetManifest train = load_manifest(train_src);
    DatasetManifest test = load_manifest(test_src);
    // deterministic subsets keep the 32-cell grid inside the time budget
    if (static_cast<int>(train.records.size()) > cfg.matrix.train_count)
      train.records.resize(static_cast<size_t>(cfg.matrix.train_count));
    if (static_cast<int>(test.records.size()) > cfg.matrix.test_count)
      test.records.resize(static_cast<size_t>(cfg.matrix.test_count));

    const std::string agg_dir = p.matrix() + "/aggregated/" + style;
    s.train_agg = precompute_aggregated_manifest(train, g_ba, g_ab, agg_dir + "/train");
    s.test_agg = precompute_aggregated_manifest(test, g_ba, g_ab, agg_dir + "/test");
    s.train = std::move(train);
    s.test = std::move(test);
    s.has_agg = true;
    sets.push_back(std::move(s));
  }

  DetectorFactory factory = [&cfg](const DatasetManifest& train, const DatasetManifest* agg,
                                   StreamMode mode, uint64_t cell_seed) {
    DetectorConfig dc = cfg.detector;
    dc.stream_mode = mode;
    dc.epochs = cfg.matrix.epochs;
    return train_detector(train, agg, dc, cell_seed);
  };
  const StyleMatrix m =
      cross_style_matrix(factory, sets, {StreamMode::OriginalOnly, StreamMode::TwoStream},
                         cfg.stage_seed("cross-style"), cfg.eval);
  write_matrix_csv(m, p.matrix() + "/nme_matrix.csv");
  write_improvement_csv(m, p.matrix() + "/improvement.csv");
}

void run_report(const PipelineConfig& cfg) {
  Paths p(cfg.out_dir);
  check(fs::exists(p.eval() + "/per_image.csv"), "report: run evaluate first");
  // re-derive the CED plot from the per-image errors
  std::ifstream f(p.eval() + "/per_image.csv");
  std::string line;
  std::getline(f, line);
  std::vector<double> nmes;
  while (std::getline(f, line)) {
    const size_t c1 = line.find(',');
    const size_t c2 = line.find(',', c1 + 1);
    const size_t c3 = line.find(',', c2 + 1);
    nmes.push_back(std::stod(line.substr(c2 + 1, c3 - c2 - 1)));
  }
  check(!nmes.empty(), "report: no per-image errors found");
  const CedCurve ced = ced_curve(nmes, cfg.eval.ced_grid());
  write_ced_svg({{stream_mode_name(cfg.detector.stream_mode), ced}}, p.eval() + "/ced.svg");
}

uint64_t hash_tree(const std::string& dir) {
  if (!fs::exists(dir)) return 0;
  std::vector<std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) files.push_back(e.path().string());
  std::sort(files.begin(), files.end());
  uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& path : files) {
    const std::string rel = fs::relative(path, dir).string();
    h = fnv1a64(rel.data(), rel.size(), h);
    std::ifstream f(path, std::ios::binary);
    std::vector<char> bytes((std::istreambuf_iterator<char>(f)),
                            std::istreambuf_iterator<char>());
    h = fnv1a64(bytes.data(), bytes.size(), h);
  }
  return h;
}

namespace {

struct Stage {
  std::string name;
  std::vector<std::string> output_dirs;
  std::function<void(const PipelineConfig&)> run;
};

std::vector<Stage> pipeline_stages(const PipelineConfig& cfg) {
  Paths p(cfg.out_dir);
  std::vector<std::string> agg_dirs;
  for (const auto& s : cfg.aggregate_styles) agg_dirs.push_back(p.aggregated(s));
  return {
      {"synth-data", {p.original()}, run_synth},
      {"stylize",
       {p.style_dir("light"), p.style_dir("gray"), p.style_dir("sketch")},
       run_stylize},
      {"discover", {p.discovery()}, run_discover},
      {"train-gan", {p.gan()}, run_train_gan},
      {"aggregate", agg_dirs, run_aggregate},
      {"train-detector", {p.detector()}, run_train_detector},
      {"evaluate", {p.eval()}, run_evaluate},
  };
}

}  // namespace

void run_pipeline(const PipelineConfig& cfg, bool resume) {
  Paths p(cfg.out_dir);
  fs::create_directories(cfg.out_dir);
  ordered_json state = ordered_json::object();
  if (resume && fs::exists(p.state_file())) {
    std::ifstream f(p.state_file());
    state = ordered_json::parse(f);
  }
  for (const Stage& stage : pipeline_stages(cfg)) {
    bool skip = false;
    if (resume && state.contains(stage.name)) {
      skip = true;
      const auto& rec = state.at(stage.name);
      for (const auto& dir : stage.output_dirs) {
        const std::string key = fs::path(dir).lexically_normal().string();
        if (!fs::exists(dir) || !rec.contains(key) ||
            rec.at(key).get<uint64_t>() != hash_tree(dir)) {
          skip = false;
          break;
        }
      }
    }
    if (skip) {
      printf("[pipeline] %-15s cached, skipping\n", stage.name.c_str());
      continue;
    }
    printf("[pipeline] %-15s running...\n", stage.name.c_str());
    fflush(stdout);
    try {
      stage.run(cfg);
    } catch (const std::exception& e) {
      throw std::runtime_error("stage '" + stage.name + "' failed: " + e.what());
    }
    ordered_json rec = ordered_json::object();
    for (const auto& dir : stage.output_dirs)
      rec[fs::path(dir).lexically_normal().string()] = hash_tree(dir);
    state[stage.name] = rec;
    std::ofstream f(p.state_file(), std::ios::trunc);
    f << state.dump(1) << "\n";
  }
}

}  // namespace pipe

}  // namespace san
