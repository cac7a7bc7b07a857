#include <doctest.h>

#include <cstdio>
#include <filesystem>

#include "san/checkpoint.hpp"
#include "san/rng.hpp"

using namespace san;

TEST_CASE("checkpoint round-trips bit-exactly") {
  Rng rng(100);
  Checkpoint ck;
  Tensor a = Tensor::zeros({3, 2, 3, 3});
  for (auto& v : a.mutable_data()) v = static_cast<float>(rng.normal());
  Tensor b = Tensor::from_values({4}, {0.1f, -0.2f, 1e-7f, 3e8f});
  ck.put("layer.w", a);
  ck.put("layer.b", b);

  const auto bytes = ck.serialize();
  Checkpoint loaded = Checkpoint::deserialize(bytes);
  CHECK(loaded.size() == 2);
  CHECK(loaded.names() == std::vector<std::string>{"layer.w", "layer.b"});
  CHECK(loaded.get("layer.w").shape() == a.shape());
  for (int64_t i = 0; i < a.numel(); ++i)
    CHECK(loaded.get("layer.w").data()[i] == a.data()[i]);

  // serialize(deserialize(x)) == x
  CHECK(loaded.serialize() == bytes);
}

TEST_CASE("checkpoint file save/load") {
  const std::string path = (std::filesystem::temp_directory_path() / "san_test.ckpt").string();
  Checkpoint ck;
  ck.put("p", Tensor::from_values({2}, {1.5f, -2.5f}));
  ck.save(path);
  Checkpoint loaded = Checkpoint::load(path);
  CHECK(loaded.get("p").data()[1] == -2.5f);
  std::filesystem::remove(path);
}

TEST_CASE("checkpoint rejects garbage and unknown names") {
  CHECK_THROWS_WITH_AS(Checkpoint::deserialize({1, 2, 3}), doctest::Contains("magic"),
                       std::runtime_error);
  Checkpoint ck;
  ck.put("a", Tensor::zeros({1}));
  CHECK_THROWS_WITH_AS(ck.get("missing"), doctest::Contains("missing"), std::runtime_error);
  CHECK_THROWS_WITH_AS(ck.put("a", Tensor::zeros({1})), doctest::Contains("duplicate"),
                       std::runtime_error);
}

TEST_CASE("load_named_params validates shapes") {
  Checkpoint ck;
  ck.put("w", Tensor::zeros({2, 2}));
  Tensor dst = Tensor::zeros({2, 3});
  CHECK_THROWS_WITH_AS(load_named_params(ck, {{"w", &dst}}),
                       doctest::Contains("shape mismatch"), std::runtime_error);
}
