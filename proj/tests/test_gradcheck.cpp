#include <doctest.h>

#include "san/gradcheck.hpp"
#include "san/ops.hpp"
#include "san/rng.hpp"

using namespace san;

namespace {

// random values bounded away from the relu/l1 kinks
DTensor kink_free(std::vector<int> shape, Rng& rng) {
  DTensor t = DTensor::zeros(std::move(shape));
  for (auto& v : t.mutable_data())
    v = rng.uniform(0.1, 1.0) * (rng.uniform() < 0.5 ? -1.0 : 1.0);
  return t;
}

}  // namespace

TEST_CASE("grad_check is near-exact for a linear map") {
  Rng rng(31);
  DTensor x = kink_free({2, 6}, rng);
  DTensor w = kink_free({4, 6}, rng);
  DTensor b = kink_free({4}, rng);
  const double err = grad_check(
      [](std::vector<DTensor>& in, DTape* tape) {
        return sum(linear(in[0], in[1], in[2], tape), tape);
      },
      {x, w, b});
  CHECK(err < 1e-9);
}

TEST_CASE("conv2d + relu on seeded input") {
  Rng rng(0);
  DTensor x = kink_free({1, 2, 6, 6}, rng);
  DTensor w = kink_free({3, 2, 3, 3}, rng);
  DTensor b = kink_free({3}, rng);
  const double err = grad_check(
      [](std::vector<DTensor>& in, DTape* tape) {
        return sum(relu(conv2d(in[0], in[1], in[2], 1, 1, tape), tape), tape);
      },
      {x, w, b});
  CHECK(err < 1e-4);
}

TEST_CASE("strided conv2d") {
  Rng rng(32);
  DTensor x = kink_free({1, 2, 7, 7}, rng);
  DTensor w = kink_free({3, 2, 3, 3}, rng);
  DTensor b = kink_free({3}, rng);
  const double err = grad_check(
      [](std::vector<DTensor>& in, DTape* tape) {
        DTensor y = conv2d(in[0], in[1], in[2], 2, 1, tape);
        return frobenius_sq_loss(y, DTensor::zeros(y.shape()), tape);
      },
      {x, w, b});
  CHECK(err < 1e-4);
}

TEST_CASE("tanh chain") {
  Rng rng(33);
  DTensor x = kink_free({2, 3, 4, 4}, rng);
  const double err = grad_check(
      [](std::vector<DTensor>& in, DTape* tape) {
        return sum(san::tanh(san::tanh(in[0], tape), tape), tape);
      },
      {x});
  CHECK(err < 1e-4);
}

TEST_CASE("max_pool2") {
  Rng rng(34);
  DTensor x = kink_free({1, 2, 6, 6}, rng);
  const double err = grad_check(
      [](std::vector<DTensor>& in, DTape* tape) {
        DTensor y = max_pool2(in[0], tape);
        return frobenius_sq_loss(y, DTensor::full(y.shape(), 0.2), tape);
      },
      {x});
  CHECK(err < 1e-4);
}

TEST_CASE("leaky_relu") {
  Rng rng(35);
  DTensor x = kink_free({2, 2, 4, 4}, rng);
  const double err = grad_check(
      [](std::vector<DTensor>& in, DTape* tape) {
        return sum(leaky_relu(in[0], 0.2, tape), tape);
      },
      {x});
  CHECK(err < 1e-4);
}

TEST_CASE("concat_channels and upsample_nearest2") {
  Rng rng(36);
  DTensor a = kink_free({1, 2, 4, 4}, rng);
  DTensor b = kink_free({1, 3, 4, 4}, rng);
  const double err = grad_check(
      [](std::vector<DTensor>& in, DTape* tape) {
        DTensor cat = concat_channels<double>({in[0], in[1]}, tape);
        DTensor up = upsample_nearest2(cat, tape);
        return frobenius_sq_loss(up, DTensor::full(up.shape(), 0.1), tape);
      },
      {a, b});
  CHECK(err < 1e-4);
}

TEST_CASE("global_avg_pool + linear + softmax cross entropy") {
  Rng rng(37);
  DTensor x = kink_free({2, 3, 4, 4}, rng);
  DTensor w = kink_free({4, 3}, rng);
  DTensor b = kink_free({4}, rng);
  const std::vector<int> labels = {1, 3};
  const double err = grad_check(
      [&labels](std::vector<DTensor>& in, DTape* tape) {
        DTensor f = global_avg_pool(in[0], tape);
        return softmax_cross_entropy(linear(f, in[1], in[2], tape), labels, tape);
      },
      {x, w, b});
  CHECK(err < 1e-4);
}

TEST_CASE("instance_norm with affine params") {
  Rng rng(38);
  DTensor x = kink_free({2, 3, 4, 4}, rng);
  DTensor gamma = kink_free({3}, rng);
  DTensor beta = kink_free({3}, rng);
  const double err = grad_check(
      [](std::vector<DTensor>& in, DTape* tape) {
        DTensor y = instance_norm(in[0], in[1], in[2], tape);
        return frobenius_sq_loss(y, DTensor::full(y.shape(), 0.3), tape);
      },
      {x, gamma, beta});
  CHECK(err < 1e-4);
}

TEST_CASE("l1, mse-to-const, scale_shift and add") {
  Rng rng(39);
  DTensor a = kink_free({2, 2, 3, 3}, rng);
  DTensor b = kink_free({2, 2, 3, 3}, rng);
  const double err = grad_check(
      [](std::vector<DTensor>& in, DTape* tape) {
        DTensor s = scale_shift(in[0], 1.7, 0.3, tape);
        DTensor l1 = l1_loss(s, in[1], tape);
        DTensor m = mse_to_const(in[0], 0.4, tape);
        return add(l1, m, tape);
      },
      {a, b});
  CHECK(err < 1e-4);
}
