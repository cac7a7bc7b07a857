#include <doctest.h>

#include <unistd.h>

#include <cmath>
#include <filesystem>

#include "san/detector.hpp"
#include "san/ref.hpp"

using namespace san;
namespace fs = std::filesystem;

namespace {

DetectorConfig tiny_config() {
  DetectorConfig cfg;
  cfg.input_size = 64;
  cfg.K = 5;
  cfg.feature_channels = {4, 6, 6, 8};
  cfg.head_channels = 8;
  return cfg;
}

Tensor random_image_tensor(int size, uint64_t seed) {
  Rng rng(seed);
  Tensor t = Tensor::zeros({1, 3, size, size});
  for (auto& v : t.mutable_data()) v = static_cast<float>(rng.uniform());
  return t;
}

}  // namespace

TEST_CASE("gt belief maps: peak value, offsets and background") {
  // landmark at (16, 24) -> heatmap (2, 3) exactly
  const std::vector<Pt> lms = {{16.0, 24.0}};
  const std::vector<bool> vis = {true};
  const Tensor gt = make_gt_beliefmaps<float>(lms, vis, 64, 1.5);
  REQUIRE(gt.shape() == std::vector<int>{2, 8, 8});
  auto at = [&](int ch, int r, int c) { return gt.data()[(ch * 8 + r) * 8 + c]; };
  CHECK(at(0, 3, 2) == doctest::Approx(1.0));
  const double off = std::exp(-1.0 / (2.0 * 1.5 * 1.5));
  CHECK(at(0, 3, 3) == doctest::Approx(off));
  CHECK(at(0, 2, 2) == doctest::Approx(off));
  // far corner: background ~ 1
  CHECK(at(1, 7, 7) > 0.99f);
  CHECK(at(1, 3, 2) == doctest::Approx(0.0));  // 1 - peak
}

TEST_CASE("gt maps: invisible landmarks zero their channel, oob is clamped with a warning") {
  const std::vector<Pt> lms = {{16.0, 24.0}, {100.0, -5.0}};
  Tensor gt = make_gt_beliefmaps<float>(lms, {false, true}, 64, 1.5);
  for (int i = 0; i < 64; ++i) CHECK(gt.data()[i] == 0.0f);  // channel 0 all zero

  int clamped = 0;
  make_gt_beliefmaps<float>(lms, {true, true}, 64, 1.5, &clamped);
  CHECK(clamped == 1);
}

TEST_CASE("forward produces (K+1, 8, 8) stacks for 64x64 input") {
  Rng rng(80);
  DetectorModel model = DetectorModel::init(tiny_config(), rng);
  const Tensor io = random_image_tensor(64, 1);
  const Tensor is = random_image_tensor(64, 2);
  const auto stacks = model.forward(io, is, nullptr);
  for (const Tensor* h : {&stacks.h_o, &stacks.h_s, &stacks.h_2, &stacks.h_3})
    CHECK(h->shape() == std::vector<int>{1, 6, 8, 8});

  // identical runs give identical outputs
  const auto again = model.forward(io, is, nullptr);
  for (int64_t i = 0; i < stacks.h_3.numel(); ++i)
    CHECK(stacks.h_3.data()[i] == again.h_3.data()[i]);
}

TEST_CASE("swapping stream inputs changes outputs (streams hold separate weights)") {
  Rng rng(81);
  DetectorModel model = DetectorModel::init(tiny_config(), rng);
  const Tensor a = random_image_tensor(64, 3);
  const Tensor b = random_image_tensor(64, 4);
  const auto ab = model.forward(a, b, nullptr);
  const auto ba = model.forward(b, a, nullptr);
  double diff = 0.0;
  for (int64_t i = 0; i < ab.h_3.numel(); ++i)
    diff = std::max(diff, std::fabs(static_cast<double>(ab.h_3.data()[i]) - ba.h_3.data()[i]));
  CHECK(diff > 1e-6);
}

TEST_CASE("original-only mode ignores the aggregated stream entirely") {
  Rng rng(82);
  DetectorConfig cfg = tiny_config();
  cfg.stream_mode = StreamMode::OriginalOnly;
  DetectorModel model = DetectorModel::init(cfg, rng);
  const Tensor io = random_image_tensor(64, 5);
  const auto with_a = model.forward(io, random_image_tensor(64, 6), nullptr);
  const auto with_b = model.forward(io, random_image_tensor(64, 7), nullptr);
  for (int64_t i = 0; i < with_a.h_3.numel(); ++i)
    CHECK(with_a.h_3.data()[i] == with_b.h_3.data()[i]);
}

TEST_CASE("detector_loss: zero residual, counted ones, random oracle") {
  Rng rng(83);
  Tensor target = Tensor::zeros({1, 6, 8, 8});
  for (auto& v : target.mutable_data()) v = static_cast<float>(rng.uniform());
  BeliefStacksT<float> stacks{target, target, target, target};
  CHECK(detector_loss<float>(stacks, target, nullptr).item() == 0.0f);

  // only H_3 differs, by all-ones, batch 1 -> 6*8*8 = 384
  Tensor ones = Tensor::zeros(target.shape());
  for (int64_t i = 0; i < ones.numel(); ++i)
    ones.mutable_data()[i] = target.data()[i] + 1.0f;
  BeliefStacksT<float> stacks2{target, target, target, ones};
  CHECK(detector_loss<float>(stacks2, target, nullptr).item() == doctest::Approx(384.0));

  // four random stacks against the scalar oracle
  auto rand_stack = [&rng](const std::vector<int>& shape) {
    Tensor t = Tensor::zeros(shape);
    for (auto& v : t.mutable_data()) v = static_cast<float>(rng.uniform(-1.0, 1.0));
    return t;
  };
  BeliefStacksT<float> rs{rand_stack({2, 6, 8, 8}), rand_stack({2, 6, 8, 8}),
                          rand_stack({2, 6, 8, 8}), rand_stack({2, 6, 8, 8})};
  Tensor t2 = rand_stack({2, 6, 8, 8});
  auto vec = [](const Tensor& t) {
    return std::vector<double>(t.data().begin(), t.data().end());
  };
  const double want = ref::frobenius_sq(vec(rs.h_o), vec(t2), 2) +
                      ref::frobenius_sq(vec(rs.h_s), vec(t2), 2) +
                      ref::frobenius_sq(vec(rs.h_2), vec(t2), 2) +
                      ref::frobenius_sq(vec(rs.h_3), vec(t2), 2);
  CHECK(detector_loss<float>(rs, t2, nullptr).item() == doctest::Approx(want).epsilon(1e-5));
}

TEST_CASE("decode: uniform map ties to (0,0); impulse stays inside its cell block") {
  Tensor uniform = Tensor::full({2, 8, 8}, 0.5f);
  const auto pts = decode_landmarks(uniform, 64);
  CHECK(pts[0].x == 0.0);
  CHECK(pts[0].y == 0.0);

  for (int r = 0; r < 8; ++r)
    for (int c = 0; c < 8; ++c) {
      Tensor stack = Tensor::zeros({2, 8, 8});
      stack.mutable_data()[r * 8 + c] = 1.0f;
      const auto lm = decode_landmarks(stack, 64)[0];
      CHECK(lm.x >= 8 * c);
      CHECK(lm.x < 8 * (c + 1));
      CHECK(lm.y >= 8 * r);
      CHECK(lm.y < 8 * (r + 1));
    }
}

TEST_CASE("decode(make_gt(x)) lands within 5 pixels on a position sample") {
  // stride/2 + 1 is a per-axis quantization bound, so distance is per-axis
  for (double x : {0.0, 7.0, 13.5, 29.0, 42.25, 53.0, 57.0, 63.0}) {
    for (double y : {0.0, 11.0, 31.5, 55.0, 63.0}) {
      const Tensor gt = make_gt_beliefmaps<float>({{x, y}}, {true}, 64, 1.5);
      const Pt p = decode_landmarks(gt, 64)[0];
      CHECK(std::max(std::fabs(p.x - x), std::fabs(p.y - y)) <= 5.0);
    }
  }
}

TEST_CASE("lr schedule halves at the configured epochs") {
  DetectorConfig cfg = DetectorConfig::paper_preset();
  CHECK(cfg.lr_at_epoch(29) == doctest::Approx(cfg.lr));
  CHECK(cfg.lr_at_epoch(30) == doctest::Approx(0.5 * cfg.lr));
  CHECK(cfg.lr_at_epoch(34) == doctest::Approx(0.5 * cfg.lr));
  CHECK(cfg.lr_at_epoch(35) == doctest::Approx(0.25 * cfg.lr));
  CHECK(cfg.lr_at_epoch(45) == doctest::Approx(0.0625 * cfg.lr));
}

TEST_CASE("config validation") {
  DetectorConfig cfg = tiny_config();
  cfg.input_size = 60;
  CHECK_THROWS_WITH_AS(cfg.validate(), doctest::Contains("divisible by 8"), std::runtime_error);
  cfg = tiny_config();
  cfg.K = 1;
  CHECK_THROWS(cfg.validate());
}

TEST_CASE("tiny training runs are seed-reproducible and logged") {
  const fs::path dir =
      fs::temp_directory_path() / ("san_det_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  SynthParams params;
  params.image_size = 48;
  params.count = 4;
  DatasetManifest train = generate_synth_dataset(params, 321, dir.string(), "t", "train");

  DetectorConfig cfg = tiny_config();
  cfg.input_size = 16;
  cfg.stream_mode = StreamMode::OriginalOnly;
  cfg.epochs = 2;
  cfg.batch = 2;
  DetectorTrainResult a = train_detector(train, nullptr, cfg, 55);
  DetectorTrainResult b = train_detector(train, nullptr, cfg, 55);
  CHECK(detector_checkpoint(a.model).serialize() == detector_checkpoint(b.model).serialize());
  REQUIRE(a.log.size() == 2);
  CHECK(a.log[0].mean_loss == b.log[0].mean_loss);
  CHECK(a.log[0].epoch == 1);

  // two-stream training without an aggregated manifest is an error
  cfg.stream_mode = StreamMode::TwoStream;
  CHECK_THROWS_WITH_AS(train_detector(train, nullptr, cfg, 1),
                       doctest::Contains("aggregated manifest required"), std::runtime_error);
  fs::remove_all(dir);
}
