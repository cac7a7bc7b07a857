#include <doctest.h>

#include <cmath>

#include "san/kmeans.hpp"
#include "san/rng.hpp"

using namespace san;

namespace {

std::vector<std::vector<float>> blobs(const std::vector<std::pair<double, double>>& centers,
                                      int per_blob, double spread, uint64_t seed,
                                      std::vector<int>* labels = nullptr) {
  Rng rng(seed);
  std::vector<std::vector<float>> pts;
  for (size_t b = 0; b < centers.size(); ++b) {
    for (int i = 0; i < per_blob; ++i) {
      pts.push_back({static_cast<float>(centers[b].first + spread * rng.normal()),
                     static_cast<float>(centers[b].second + spread * rng.normal())});
      if (labels) labels->push_back(static_cast<int>(b));
    }
  }
  return pts;
}

}  // namespace

TEST_CASE("k=1 centroid is the mean") {
  const std::vector<std::vector<float>> pts = {{0, 0}, {2, 0}, {0, 2}, {2, 2}};
  const ClusterModel m = kmeans_cluster(pts, 1, 5);
  CHECK(m.centroids[0][0] == doctest::Approx(1.0));
  CHECK(m.centroids[0][1] == doctest::Approx(1.0));
  for (int a : m.assignments) CHECK(a == 0);
}

TEST_CASE("three well-separated blobs recover blob identity up to permutation") {
  std::vector<int> labels;
  const auto pts = blobs({{0, 0}, {10, 0}, {0, 10}}, 40, 0.3, 17, &labels);
  const ClusterModel m = kmeans_cluster(pts, 3, 17);
  // brute-force nearest-blob oracle: purity vs known blob labels must be 1
  CHECK(cluster_purity(m.assignments, labels, 3) == doctest::Approx(1.0));
  // every point is assigned to its nearest centroid
  for (size_t i = 0; i < pts.size(); ++i) {
    double best = 1e300;
    int best_c = -1;
    for (int c = 0; c < 3; ++c) {
      double d = 0;
      for (int j = 0; j < 2; ++j)
        d += (pts[i][static_cast<size_t>(j)] - m.centroids[static_cast<size_t>(c)][static_cast<size_t>(j)]) *
             (pts[i][static_cast<size_t>(j)] - m.centroids[static_cast<size_t>(c)][static_cast<size_t>(j)]);
      if (d < best) {
        best = d;
        best_c = c;
      }
    }
    CHECK(m.assignments[i] == best_c);
  }
}

TEST_CASE("inertia is non-increasing across Lloyd iterations") {
  const auto pts = blobs({{0, 0}, {4, 1}, {1, 5}, {6, 6}}, 30, 1.0, 23);
  const ClusterModel m = kmeans_cluster(pts, 4, 23);
  for (size_t i = 1; i < m.inertia_trace.size(); ++i)
    CHECK(m.inertia_trace[i] <= m.inertia_trace[i - 1] + 1e-9);
}

TEST_CASE("kmeans is deterministic given the seed") {
  const auto pts = blobs({{0, 0}, {5, 5}}, 50, 1.2, 31);
  const ClusterModel a = kmeans_cluster(pts, 2, 99);
  const ClusterModel b = kmeans_cluster(pts, 2, 99);
  CHECK(a.assignments == b.assignments);
  CHECK(a.inertia == b.inertia);
}

TEST_CASE("fewer than k points is an error") {
  const std::vector<std::vector<float>> pts = {{0, 0}, {1, 1}};
  CHECK_THROWS_WITH_AS(kmeans_cluster(pts, 3, 1), doctest::Contains("at least"),
                       std::runtime_error);
}

TEST_CASE("select_cluster_pair follows the max/min tie rules") {
  ClusterModel m;
  m.k = 3;
  m.assignments = {};
  auto with_sizes = [](std::vector<int> sizes) {
    ClusterModel cm;
    cm.k = static_cast<int>(sizes.size());
    for (int c = 0; c < cm.k; ++c)
      for (int i = 0; i < sizes[static_cast<size_t>(c)]; ++i) cm.assignments.push_back(c);
    return cm;
  };
  CHECK(select_cluster_pair(with_sizes({10, 50, 3})) == std::pair<int, int>{1, 2});
  CHECK(select_cluster_pair(with_sizes({5, 5, 5})) == std::pair<int, int>{0, 1});
  CHECK(select_cluster_pair(with_sizes({7, 9})) == std::pair<int, int>{1, 0});
}

TEST_CASE("l2_normalize produces unit rows and keeps zeros") {
  std::vector<std::vector<float>> f = {{3, 4}, {0, 0}};
  l2_normalize(f);
  CHECK(f[0][0] == doctest::Approx(0.6));
  CHECK(f[0][1] == doctest::Approx(0.8));
  CHECK(f[1][0] == 0.0f);
}

TEST_CASE("empty clusters are reseeded rather than dropped") {
  // one far outlier and a tight mass: k-means++ may seed two centroids in the
  // mass; the reseed path must still return k non-empty clusters
  std::vector<std::vector<float>> pts;
  for (int i = 0; i < 50; ++i) pts.push_back({0.0f, static_cast<float>(i) * 1e-4f});
  pts.push_back({100.0f, 0.0f});
  for (uint64_t seed = 0; seed < 10; ++seed) {
    const ClusterModel m = kmeans_cluster(pts, 3, seed);
    const auto sizes = m.sizes();
    int nonzero = 0;
    for (int s : sizes) nonzero += s > 0 ? 1 : 0;
    CHECK(nonzero == 3);
  }
}
