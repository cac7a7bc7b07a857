#include "san/classifier.hpp"

#include <algorithm>

#include "san/filters.hpp"
#include "san/optim.hpp"

namespace san {

template <typename T>
StyleClassifierT<T> StyleClassifierT<T>::init(const ClassifierConfig& cfg, int num_classes,
                                              Rng& rng) {
  check(cfg.input_size % 8 == 0, "classifier input_size must be divisible by 8");
  StyleClassifierT<T> m;
  m.cfg = cfg;
  m.num_classes = num_classes;
  m.block1 = nn::conv_he<T>(rng, 3, 16, 3, 1, 1);
  m.block2 = nn::conv_he<T>(rng, 16, 32, 3, 1, 1);
  m.block3 = nn::conv_he<T>(rng, 32, 32, 3, 1, 1);
  m.block4 = nn::conv_he<T>(rng, 32, cfg.feature_dim, 3, 1, 1);
  m.head = nn::linear_head<T>(rng, cfg.feature_dim, num_classes);
  return m;
}

template <typename T>
TensorT<T> StyleClassifierT<T>::forward_features(const TensorT<T>& x, TapeT<T>* tape) const {
  // center [0,1] inputs
  auto h0 = scale_shift(x, T(2), T(-1), tape);
  auto h = max_pool2(relu(block1(h0, tape), tape), tape);
  h = max_pool2(relu(block2(h, tape), tape), tape);
  h = max_pool2(relu(block3(h, tape), tape), tape);
  h = relu(block4(h, tape), tape);
  return global_avg_pool(h, tape);
}

template <typename T>
TensorT<T> StyleClassifierT<T>::forward_logits(const TensorT<T>& x, TapeT<T>* tape) const {
  return head(forward_features(x, tape), tape);
}

template <typename T>
nn::ParamList<T> StyleClassifierT<T>::named_params() {
  nn::ParamList<T> p;
  nn::collect(p, "block1", block1);
  nn::collect(p, "block2", block2);
  nn::collect(p, "block3", block3);
  nn::collect(p, "block4", block4);
  nn::collect(p, "head", head);
  return p;
}

template struct StyleClassifierT<float>;

namespace {

Tensor batch_tensor(const std::vector<Tensor>& images, const std::vector<size_t>& idx,
                    size_t lo, size_t hi) {
  const int c = images[0].dim(1), h = images[0].dim(2), w = images[0].dim(3);
  Tensor out = Tensor::zeros({static_cast<int>(hi - lo), c, h, w});
  auto d = out.mutable_data();
  const int64_t sz = images[0].numel();
  for (size_t i = lo; i < hi; ++i) {
    auto s = images[idx[i]].data();
    std::copy(s.begin(), s.end(), d.begin() + static_cast<int64_t>(i - lo) * sz);
  }
  return out;
}

}  // namespace

ClassifierTrainResult train_style_classifier(const DatasetManifest& original,
                                             const std::vector<DatasetManifest>& styled,
                                             const ClassifierConfig& cfg, uint64_t seed) {
  for (const auto& sm : styled)
    check(sm.records.size() == original.records.size(),
          "train_style_classifier: styled manifest '" + sm.name +
              "' is not record-aligned with the original");

  // preload all images at classifier resolution
  std::vector<Tensor> images;
  std::vector<int> labels;
  std::vector<const DatasetManifest*> sources = {&original};
  for (const auto& sm : styled) sources.push_back(&sm);
  for (size_t cls = 0; cls < sources.size(); ++cls) {
    for (const auto& r : sources[cls]->records) {
      const RgbImage img = read_png(sources[cls]->resolve(r.image_path));
      images.push_back(image_to_tensor(resize_image(img, cfg.input_size, cfg.input_size)));
      labels.push_back(static_cast<int>(cls));
    }
  }

  Rng rng(derive_seed(seed, "classifier"));
  StyleClassifier model = StyleClassifier::init(cfg, static_cast<int>(sources.size()), rng);
  auto params = model.named_params();
  Optimizer opt(nn::tensors_of(params),
                cfg.adam ? OptimConfig::adam(cfg.lr) : OptimConfig::sgd(cfg.lr, cfg.momentum));

  std::vector<size_t> order(images.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;

  ClassifierTrainResult res;
  bool first = true;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    for (size_t lo = 0; lo < order.size(); lo += static_cast<size_t>(cfg.batch)) {
      const size_t hi = std::min(order.size(), lo + static_cast<size_t>(cfg.batch));
      Tensor batch = batch_tensor(images, order, lo, hi);
      std::vector<int> batch_labels;
      for (size_t i = lo; i < hi; ++i) batch_labels.push_back(labels[order[i]]);
      Tape tape;
      Tensor logits = model.forward_logits(batch, &tape);
      Tensor loss = softmax_cross_entropy(logits, batch_labels, &tape);
      check(std::isfinite(loss.item()), "train_style_classifier: loss diverged");
      if (first) {
        res.initial_loss = loss.item();
        first = false;
      }
      res.final_loss = loss.item();
      opt.zero_grad();
      tape.backward(loss);
      opt.step();
    }
  }

  // final train accuracy
  size_t correct = 0;
  for (size_t lo = 0; lo < images.size(); lo += 64) {
    const size_t hi = std::min(images.size(), lo + 64);
    std::vector<size_t> idx(hi - lo);
    for (size_t i = lo; i < hi; ++i) idx[i - lo] = i;
    Tensor batch = batch_tensor(images, idx, 0, idx.size());
    Tensor logits = model.forward_logits(batch, nullptr);
    auto d = logits.data();
    const int c = logits.dim(1);
    for (size_t i = 0; i < idx.size(); ++i) {
      int best = 0;
      for (int j = 1; j < c; ++j)
        if (d[static_cast<int64_t>(i) * c + j] > d[static_cast<int64_t>(i) * c + best]) best = j;
      if (best == labels[idx[i]]) ++correct;
    }
  }
  res.train_accuracy = static_cast<double>(correct) / static_cast<double>(images.size());
  res.model = std::move(model);
  return res;
}

std::vector<float> extract_style_feature(const StyleClassifier& clf, const RgbImage& img) {
  const Tensor x = image_to_tensor(resize_image(img, clf.cfg.input_size, clf.cfg.input_size));
  const Tensor f = clf.forward_features(x, nullptr);
  auto d = f.data();
  return {d.begin(), d.end()};
}

std::vector<std::vector<float>> extract_style_features(const StyleClassifier& clf,
                                                       const DatasetManifest& m) {
  std::vector<std::vector<float>> out(m.records.size());
#pragma omp parallel for schedule(dynamic)
  for (int64_t i = 0; i < static_cast<int64_t>(m.records.size()); ++i) {
    const RgbImage img = read_png(m.resolve(m.records[static_cast<size_t>(i)].image_path));
    out[static_cast<size_t>(i)] = extract_style_feature(clf, img);
  }
  return out;
}

Checkpoint classifier_checkpoint(StyleClassifier& clf) {
  auto params = clf.named_params();
  Checkpoint ck = save_named_params(params);
  return ck;
}

StyleClassifier classifier_from_checkpoint(const ClassifierConfig& cfg, const Checkpoint& ck) {
  Rng rng(0);
  StyleClassifier clf = StyleClassifier::init(cfg, 4, rng);
  auto params = clf.named_params();
  load_named_params(ck, params);
  return clf;
}

}  // namespace san
