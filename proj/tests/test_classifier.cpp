#include <doctest.h>

#include <unistd.h>

#include <filesystem>

#include "san/classifier.hpp"
#include "san/filters.hpp"

using namespace san;
namespace fs = std::filesystem;

namespace {

struct Corpus {
  fs::path dir;
  DatasetManifest original;
  std::vector<DatasetManifest> styled;

  explicit Corpus(int n) {
    dir = fs::temp_directory_path() / ("san_clf_" + std::to_string(::getpid()) + "_" +
                                       std::to_string(n));
    fs::create_directories(dir);
    SynthParams params;
    params.image_size = 48;
    params.count = n;
    original = generate_synth_dataset(params, 1234, (dir / "orig").string(), "clf", "train");
    styled = generate_styled_dataset(original, (dir / "styled").string());
  }
  ~Corpus() { fs::remove_all(dir); }
};

}  // namespace

TEST_CASE("single image per class memorizes to accuracy 1.0") {
  Corpus corpus(1);
  ClassifierConfig cfg;
  cfg.input_size = 16;
  cfg.feature_dim = 16;
  cfg.epochs = 150;
  cfg.lr = 0.02;
  cfg.batch = 4;
  const ClassifierTrainResult res =
      train_style_classifier(corpus.original, corpus.styled, cfg, 5);
  CHECK(res.train_accuracy == doctest::Approx(1.0));
  CHECK(res.final_loss < res.initial_loss);
}

TEST_CASE("extract_style_feature is deterministic with the configured width") {
  Corpus corpus(2);
  ClassifierConfig cfg;
  cfg.input_size = 16;
  cfg.feature_dim = 24;
  cfg.epochs = 2;
  cfg.batch = 4;
  const ClassifierTrainResult res =
      train_style_classifier(corpus.original, corpus.styled, cfg, 6);
  const RgbImage img = read_png(corpus.original.resolve(corpus.original.records[0].image_path));
  const auto f1 = extract_style_feature(res.model, img);
  const auto f2 = extract_style_feature(res.model, img);
  CHECK(f1.size() == 24);
  CHECK(f1 == f2);
}

TEST_CASE("classifier checkpoints restore the exact function") {
  Corpus corpus(2);
  ClassifierConfig cfg;
  cfg.input_size = 16;
  cfg.feature_dim = 16;
  cfg.epochs = 1;
  cfg.batch = 4;
  ClassifierTrainResult res = train_style_classifier(corpus.original, corpus.styled, cfg, 7);
  const Checkpoint ck = classifier_checkpoint(res.model);
  StyleClassifier restored = classifier_from_checkpoint(cfg, ck);
  const RgbImage img = read_png(corpus.original.resolve(corpus.original.records[1].image_path));
  CHECK(extract_style_feature(res.model, img) == extract_style_feature(restored, img));
}

TEST_CASE("training is reproducible for a fixed seed") {
  Corpus corpus(2);
  ClassifierConfig cfg;
  cfg.input_size = 16;
  cfg.feature_dim = 16;
  cfg.epochs = 2;
  cfg.batch = 4;
  ClassifierTrainResult a = train_style_classifier(corpus.original, corpus.styled, cfg, 11);
  ClassifierTrainResult b = train_style_classifier(corpus.original, corpus.styled, cfg, 11);
  CHECK(classifier_checkpoint(a.model).serialize() == classifier_checkpoint(b.model).serialize());
}

TEST_CASE("misaligned styled manifests are rejected") {
  Corpus corpus(2);
  auto broken = corpus.styled;
  broken[0].records.pop_back();
  ClassifierConfig cfg;
  cfg.input_size = 16;
  CHECK_THROWS_WITH_AS(train_style_classifier(corpus.original, broken, cfg, 1),
                       doctest::Contains("record-aligned"), std::runtime_error);
}
