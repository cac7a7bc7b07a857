#pragma once

#include <string>
#include <vector>

#include "san/checkpoint.hpp"
#include "san/dataset.hpp"
#include "san/nn.hpp"

namespace san {

struct ClassifierConfig {
  int input_size = 32;
  int feature_dim = 64;
  int epochs = 2;
  double lr = 0.01;
  double momentum = 0.9;
  int batch = 16;
  bool adam = false;
};

// Small style classifier: four conv blocks (the first three followed by a
// 2x2 max pool), global average pooling, linear head. The pooled penultimate
// vector is the style-discriminative feature.
template <typename T>
struct StyleClassifierT {
  ClassifierConfig cfg;
  ConvLayer<T> block1, block2, block3, block4;
  LinearLayer<T> head;
  int num_classes = 4;

  static StyleClassifierT init(const ClassifierConfig& cfg, int num_classes, Rng& rng);

  // [N,3,S,S] -> [N, feature_dim]
  TensorT<T> forward_features(const TensorT<T>& x, TapeT<T>* tape) const;
  // [N,3,S,S] -> [N, num_classes]
  TensorT<T> forward_logits(const TensorT<T>& x, TapeT<T>* tape) const;

  nn::ParamList<T> named_params();
};

using StyleClassifier = StyleClassifierT<float>;

struct ClassifierTrainResult {
  StyleClassifier model;
  double train_accuracy = 0.0;
  double initial_loss = 0.0;
  double final_loss = 0.0;
};

// 4-class training: class 0 = original manifest, classes 1.. = styled
// manifests in order. Manifests must be record-aligned with the original.
ClassifierTrainResult train_style_classifier(const DatasetManifest& original,
                                             const std::vector<DatasetManifest>& styled,
                                             const ClassifierConfig& cfg, uint64_t seed);

// Deterministic pooled feature for one image (resized to cfg.input_size).
std::vector<float> extract_style_feature(const StyleClassifier& clf, const RgbImage& img);

// Features for every record of a manifest, extraction parallel over images.
std::vector<std::vector<float>> extract_style_features(const StyleClassifier& clf,
                                                       const DatasetManifest& m);

Checkpoint classifier_checkpoint(StyleClassifier& clf);
StyleClassifier classifier_from_checkpoint(const ClassifierConfig& cfg, const Checkpoint& ck);

}  // namespace san
