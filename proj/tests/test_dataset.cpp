#include <doctest.h>

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <map>

#include "san/dataset.hpp"
#include "san/filters.hpp"

using namespace san;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("san_ds_" + std::to_string(::getpid()) + "_" +
                                        std::to_string(reinterpret_cast<uintptr_t>(this)));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

DatasetManifest tiny_manifest(const fs::path& dir, int n) {
  SynthParams params;
  params.image_size = 48;
  params.count = n;
  return generate_synth_dataset(params, 900, dir.string(), "tiny", "train");
}

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("synth_face is bit-deterministic and anchored to analytic geometry") {
  SynthParams params;
  params.image_size = 64;
  const SynthFace a = synth_face(params, 31337);
  const SynthFace b = synth_face(params, 31337);
  CHECK(a.image.px == b.image.px);
  REQUIRE(a.record.annotation.K() == kSynthK);
  for (int k = 0; k < kSynthK; ++k) {
    CHECK(a.record.annotation.points[static_cast<size_t>(k)].x ==
          b.record.annotation.points[static_cast<size_t>(k)].x);
  }
  const SynthFace c = synth_face(params, 31338);
  CHECK(a.image.px != c.image.px);

  // eye corners are horizontally outside the mouth corners and above them
  const auto& p = a.record.annotation.points;
  CHECK(p[kSynthLeftEye].x < p[kSynthMouthL].x);
  CHECK(p[kSynthRightEye].x > p[kSynthMouthR].x);
  CHECK(p[kSynthLeftEye].y < p[kSynthNose].y);
  CHECK(p[kSynthNose].y < p[kSynthMouthL].y);
}

TEST_CASE("500 seeded faces keep all landmarks inside the face box") {
  SynthParams params;
  params.image_size = 64;
  for (uint64_t seed = 0; seed < 500; ++seed) {
    const SynthFace f = synth_face(params, seed);
    const Box& b = f.record.box;
    for (const Pt& p : f.record.annotation.points) {
      CHECK(p.x >= b.x1);
      CHECK(p.x <= b.x2);
      CHECK(p.y >= b.y1);
      CHECK(p.y <= b.y2);
    }
  }
}

TEST_CASE("manifest write/read round trip preserves structure") {
  TempDir tmp;
  DatasetManifest m = tiny_manifest(tmp.path / "src", 4);
  const std::string path = (tmp.path / "m.json").string();
  write_manifest(m, path);
  const DatasetManifest r = read_manifest(path);
  CHECK(r.name == m.name);
  CHECK(r.split == m.split);
  CHECK(r.style == m.style);
  CHECK(r.K == m.K);
  REQUIRE(r.records.size() == m.records.size());
  for (size_t i = 0; i < r.records.size(); ++i) {
    CHECK(r.records[i].image_path == m.records[i].image_path);
    CHECK(r.records[i].box.x1 == m.records[i].box.x1);
    for (int k = 0; k < m.K; ++k)
      CHECK(r.records[i].annotation.points[static_cast<size_t>(k)].x ==
            m.records[i].annotation.points[static_cast<size_t>(k)].x);
  }
  // empty manifest is valid
  DatasetManifest empty = m;
  empty.records.clear();
  write_manifest(empty, (tmp.path / "empty.json").string());
  CHECK(read_manifest((tmp.path / "empty.json").string()).records.empty());
}

TEST_CASE("manifest validation rejects mixed K, unknown keys, malformed json") {
  TempDir tmp;
  const auto write_file = [&](const std::string& name, const std::string& body) {
    std::ofstream f(tmp.path / name);
    f << body;
    return (tmp.path / name).string();
  };
  const std::string good_rec =
      R"({"image":"a.png","box":[0,0,10,10],"landmarks":[[1,1],[2,2]],"visibility":[true,true]})";
  const std::string bad_rec =
      R"({"image":"b.png","box":[0,0,10,10],"landmarks":[[1,1],[2,2],[3,3]],"visibility":[true,true,true]})";
  CHECK_THROWS_WITH_AS(
      read_manifest(write_file(
          "mixed.json", R"({"name":"x","split":"train","style":"original","K":2,"records":[)" +
                            good_rec + "," + bad_rec + "]}")),
      doctest::Contains("K="), std::runtime_error);
  CHECK_THROWS_WITH_AS(
      read_manifest(write_file(
          "unknown.json",
          R"({"name":"x","split":"train","style":"original","K":2,"bogus":1,"records":[]})")),
      doctest::Contains("bogus"), std::runtime_error);
  CHECK_THROWS_WITH_AS(read_manifest(write_file("bad.json", "{not json")),
                       doctest::Contains("malformed"), std::runtime_error);
  CHECK_THROWS_WITH_AS(
      read_manifest(write_file(
          "nosplit.json", R"({"name":"x","split":"weird","style":"original","K":2,"records":[]})")),
      doctest::Contains("split"), std::runtime_error);
}

TEST_CASE("split_dataset is a deterministic partition") {
  TempDir tmp;
  DatasetManifest m = tiny_manifest(tmp.path / "src", 10);
  // pad to 100 records by repeating (image paths don't matter for the split)
  while (m.records.size() < 100) m.records.push_back(m.records[m.records.size() % 10]);
  auto [train_a, test_a] = split_dataset(m, 0.8, 7);
  auto [train_b, test_b] = split_dataset(m, 0.8, 7);
  CHECK(train_a.records.size() == 80);
  CHECK(test_a.records.size() == 20);
  CHECK(train_a.records.size() == train_b.records.size());
  for (size_t i = 0; i < train_a.records.size(); ++i)
    CHECK(train_a.records[i].image_path == train_b.records[i].image_path);

  // union of splits covers the multiset of records
  auto count_paths = [](const DatasetManifest& man) {
    std::map<std::string, int> c;
    for (const auto& r : man.records) c[r.image_path]++;
    return c;
  };
  auto u = count_paths(train_a);
  for (auto& [k, v] : count_paths(test_a)) u[k] += v;
  CHECK(u == count_paths(m));

  CHECK_THROWS(split_dataset(m, 0.0, 1));
  CHECK_THROWS(split_dataset(m, 1.0, 1));
}

TEST_CASE("generate_styled_dataset mirrors geometry and applies filters") {
  TempDir tmp;
  DatasetManifest m = tiny_manifest(tmp.path / "src", 3);
  const auto styled = generate_styled_dataset(m, (tmp.path / "styled").string());
  REQUIRE(styled.size() == 3);  // one per filter
  size_t total = 0;
  for (const auto& sm : styled) total += sm.records.size();
  CHECK(total == 3 * m.records.size());

  for (const auto& sm : styled) {
    REQUIRE(sm.records.size() == m.records.size());
    for (size_t i = 0; i < sm.records.size(); ++i) {
      // annotations byte-identical: landmarks and boxes compare equal as doubles
      CHECK(sm.records[i].box.x1 == m.records[i].box.x1);
      CHECK(sm.records[i].box.y2 == m.records[i].box.y2);
      for (int k = 0; k < m.K; ++k) {
        CHECK(sm.records[i].annotation.points[static_cast<size_t>(k)].x ==
              m.records[i].annotation.points[static_cast<size_t>(k)].x);
        CHECK(sm.records[i].annotation.points[static_cast<size_t>(k)].y ==
              m.records[i].annotation.points[static_cast<size_t>(k)].y);
      }
      CHECK(sm.records[i].style_tag == sm.style);
    }
  }

  // gray manifest images satisfy R=G=B
  const auto& gray = styled[1];
  REQUIRE(gray.style == "gray");
  const RgbImage g = read_png(gray.resolve(gray.records[0].image_path));
  for (int y = 0; y < g.height; ++y)
    for (int x = 0; x < g.width; ++x) {
      CHECK(g.at(x, y, 0) == g.at(x, y, 1));
      CHECK(g.at(x, y, 0) == g.at(x, y, 2));
    }

  // re-running produces byte-identical stylized images
  const std::string sample = styled[0].resolve(styled[0].records[0].image_path);
  const std::string before = slurp(sample);
  generate_styled_dataset(m, (tmp.path / "styled").string());
  CHECK(slurp(sample) == before);
}

TEST_CASE("pts sidecar round trip") {
  TempDir tmp;
  LandmarkAnnotation ann;
  ann.points = {{1.5, 2.25}, {3.0, 4.125}, {5.5, 6.75}};
  ann.visibility = {true, true, true};
  const std::string path = (tmp.path / "face.pts").string();
  write_pts(ann, path);
  const LandmarkAnnotation back = read_pts(path);
  REQUIRE(back.K() == 3);
  for (int k = 0; k < 3; ++k) {
    CHECK(back.points[static_cast<size_t>(k)].x ==
          doctest::Approx(ann.points[static_cast<size_t>(k)].x));
    CHECK(back.points[static_cast<size_t>(k)].y ==
          doctest::Approx(ann.points[static_cast<size_t>(k)].y));
  }
  std::ofstream bad(tmp.path / "bad.pts");
  bad << "version: 1\nn_points: 1\n{\n1 2\n}\n";
  bad.close();
  CHECK_THROWS(read_pts((tmp.path / "bad.pts").string()));  // K must be >= 2
}
