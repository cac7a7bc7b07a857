#include <doctest.h>

#include <cmath>

#include "san/cyclegan.hpp"
#include "san/ref.hpp"

using namespace san;

namespace {

std::vector<Tensor> noise_images(int n, int size, uint64_t seed) {
  Rng rng(seed);
  std::vector<Tensor> out;
  for (int i = 0; i < n; ++i) {
    Tensor t = Tensor::zeros({1, 3, size, size});
    for (auto& v : t.mutable_data()) v = static_cast<float>(rng.uniform());
    out.push_back(t);
  }
  return out;
}

CycleTrainConfig tiny_config(uint64_t seed) {
  CycleTrainConfig cfg;
  cfg.image_size = 16;
  cfg.base_channels = 4;
  cfg.res_blocks = 1;
  cfg.disc_channels = 4;
  cfg.batch = 2;
  cfg.iterations = 2;
  cfg.seed = seed;
  cfg.log_interval = 1;
  return cfg;
}

}  // namespace

TEST_CASE("identity generators give exactly zero cycle and identity loss") {
  Rng rng(60);
  Tensor a = Tensor::zeros({2, 3, 8, 8});
  Tensor b = Tensor::zeros({2, 3, 8, 8});
  for (auto& v : a.mutable_data()) v = static_cast<float>(rng.uniform());
  for (auto& v : b.mutable_data()) v = static_cast<float>(rng.uniform());

  ApplyFnT<float> identity = [](const Tensor& x, Tape*) { return x; };
  ApplyFnT<float> zero_disc = [](const Tensor& x, Tape*) {
    return Tensor::zeros({x.dim(0), 1, 2, 2});
  };
  const auto parts =
      cycle_losses<float>(identity, identity, zero_disc, zero_disc, a, b, 10.0, 0.1, nullptr);
  CHECK(parts.cycle.item() == 0.0f);
  CHECK(parts.identity.item() == 0.0f);
  // only the adversarial terms remain: D outputs 0, target 1 -> mse 1 each
  CHECK(parts.adv_a.item() == doctest::Approx(1.0));
  CHECK(parts.adv_b.item() == doctest::Approx(1.0));
  CHECK(parts.total_g.item() == doctest::Approx(2.0));
}

TEST_CASE("cycle loss terms match the elementwise oracle") {
  Rng rng(61);
  Tensor a = Tensor::zeros({1, 3, 4, 4});
  Tensor b = Tensor::zeros({1, 3, 4, 4});
  Tensor fa = Tensor::zeros({1, 3, 4, 4});
  Tensor fb = Tensor::zeros({1, 3, 4, 4});
  for (Tensor* t : {&a, &b, &fa, &fb})
    for (auto& v : t->mutable_data()) v = static_cast<float>(rng.uniform(-1.0, 1.0));

  // generators that always return the fixed tensors: G_ab(x)=fb, G_ba(x)=fa
  ApplyFnT<float> g_ab = [&fb](const Tensor&, Tape*) { return fb; };
  ApplyFnT<float> g_ba = [&fa](const Tensor&, Tape*) { return fa; };
  ApplyFnT<float> zero_disc = [](const Tensor& x, Tape*) {
    return Tensor::zeros({x.dim(0), 1, 2, 2});
  };
  const auto parts = cycle_losses<float>(g_ab, g_ba, zero_disc, zero_disc, a, b, 10.0, 0.1,
                                         nullptr);

  auto vec = [](const Tensor& t) {
    return std::vector<double>(t.data().begin(), t.data().end());
  };
  // cycle: G_ba(G_ab(a)) = fa vs a, G_ab(G_ba(b)) = fb vs b
  const double want_cycle = ref::l1_mean(vec(fa), vec(a)) + ref::l1_mean(vec(fb), vec(b));
  // identity: G_ab(b) = fb vs b, G_ba(a) = fa vs a
  const double want_idt = ref::l1_mean(vec(fb), vec(b)) + ref::l1_mean(vec(fa), vec(a));
  CHECK(parts.cycle.item() == doctest::Approx(want_cycle).epsilon(1e-5));
  CHECK(parts.identity.item() == doctest::Approx(want_idt).epsilon(1e-5));
  CHECK(parts.total_g.item() ==
        doctest::Approx(2.0 + 10.0 * want_cycle + 10.0 * 0.1 * want_idt).epsilon(1e-5));
}

TEST_CASE("generator keeps spatial size and [0,1] range") {
  Rng rng(62);
  Generator g = Generator::init(4, 1, rng);
  Tensor x = Tensor::zeros({1, 3, 16, 16});
  for (auto& v : x.mutable_data()) v = static_cast<float>(rng.uniform());
  const Tensor y = g.forward(x, nullptr);
  CHECK(y.shape() == x.shape());
  for (auto v : y.data()) {
    CHECK(v >= 0.0f);
    CHECK(v <= 1.0f);
  }
  CHECK_THROWS(g.forward(Tensor::zeros({1, 3, 10, 10}), nullptr));  // not divisible by 4
}

TEST_CASE("one training step changes generator parameters") {
  const auto images_a = noise_images(3, 16, 70);
  const auto images_b = noise_images(3, 16, 71);
  CycleTrainConfig cfg0 = tiny_config(7);
  cfg0.iterations = 0;
  CycleTrainConfig cfg1 = tiny_config(7);
  cfg1.iterations = 1;
  CycleTrainResult before = train_cycle_generators(images_a, images_b, cfg0);
  CycleTrainResult after = train_cycle_generators(images_a, images_b, cfg1);
  const auto b0 = generator_checkpoint(before.g_ab).serialize();
  const auto b1 = generator_checkpoint(after.g_ab).serialize();
  CHECK(b0 != b1);
}

TEST_CASE("training is reproducible for a fixed seed") {
  const auto images_a = noise_images(3, 16, 72);
  const auto images_b = noise_images(3, 16, 73);
  CycleTrainResult r1 = train_cycle_generators(images_a, images_b, tiny_config(33));
  CycleTrainResult r2 = train_cycle_generators(images_a, images_b, tiny_config(33));
  CHECK(generator_checkpoint(r1.g_ab).serialize() == generator_checkpoint(r2.g_ab).serialize());
  CHECK(generator_checkpoint(r1.g_ba).serialize() == generator_checkpoint(r2.g_ba).serialize());
  REQUIRE(!r1.log.empty());
  CHECK(r1.log.back().cycle == r2.log.back().cycle);

  CHECK_THROWS_WITH_AS(train_cycle_generators({}, images_b, tiny_config(1)),
                       doctest::Contains("non-empty"), std::runtime_error);
}

TEST_CASE("aggregate_style averages the two generator outputs") {
  Rng rng(63);
  // rig generators to constant outputs: zero weights, saturated output bias
  Generator g_zero = Generator::init(4, 1, rng);
  Generator g_one = Generator::init(4, 1, rng);
  for (auto& [name, t] : g_zero.named_params())
    for (auto& v : t->mutable_data()) v = 0.0f;
  for (auto& [name, t] : g_one.named_params())
    for (auto& v : t->mutable_data()) v = 0.0f;
  for (auto& [name, t] : g_zero.named_params())
    if (name == "out.b")
      for (auto& v : t->mutable_data()) v = -30.0f;  // tanh -> -1 -> mapped to 0
  for (auto& [name, t] : g_one.named_params())
    if (name == "out.b")
      for (auto& v : t->mutable_data()) v = 30.0f;  // tanh -> 1 -> mapped to 1

  RgbImage img(20, 20);  // not divisible by 4: exercises the resize path
  for (auto& v : img.px) v = 0.25f;
  const RgbImage agg = aggregate_style(img, g_zero, g_one);
  CHECK(agg.width == img.width);
  CHECK(agg.height == img.height);
  for (auto v : agg.px) CHECK(v == doctest::Approx(0.5).epsilon(1e-4));
}
