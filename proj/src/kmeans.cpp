#include "san/kmeans.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "san/common.hpp"
#include "san/rng.hpp"

namespace san {

namespace {

double sq_dist(const std::vector<float>& a, const std::vector<float>& b) {
  double acc = 0.0;
  for (size_t i = 0; i < a.size(); ++i)
    acc += (static_cast<double>(a[i]) - b[i]) * (static_cast<double>(a[i]) - b[i]);
  return acc;
}

int nearest_centroid(const std::vector<float>& p, const std::vector<std::vector<float>>& cents,
                     double* dist_out = nullptr) {
  int best = 0;
  double bd = sq_dist(p, cents[0]);
  for (size_t c = 1; c < cents.size(); ++c) {
    const double d = sq_dist(p, cents[c]);
    if (d < bd) {  // strict: ties keep the lowest index
      bd = d;
      best = static_cast<int>(c);
    }
  }
  if (dist_out) *dist_out = bd;
  return best;
}

}  // namespace

std::vector<int> ClusterModel::sizes() const {
  std::vector<int> s(static_cast<size_t>(k), 0);
  for (int a : assignments) s[static_cast<size_t>(a)]++;
  return s;
}

void l2_normalize(std::vector<std::vector<float>>& features) {
  for (auto& f : features) {
    double norm = 0.0;
    for (float v : f) norm += static_cast<double>(v) * v;
    norm = std::sqrt(norm);
    if (norm <= 0.0) continue;
    for (float& v : f) v = static_cast<float>(v / norm);
  }
}

ClusterModel kmeans_cluster(const std::vector<std::vector<float>>& features, int k,
                            uint64_t seed) {
  const size_t n = features.size();
  check(k >= 1, "kmeans: k must be >= 1");
  check(static_cast<int>(n) >= k,
        "kmeans: need at least k=" + std::to_string(k) + " points, got " + std::to_string(n));

  Rng rng(derive_seed(seed, "kmeans"));
  ClusterModel model;
  model.k = k;

  // k-means++ seeding
  model.centroids.push_back(features[static_cast<size_t>(rng.uniform_int(static_cast<int>(n)))]);
  std::vector<double> d2(n);
  while (static_cast<int>(model.centroids.size()) < k) {
    double total = 0.0;
    for (size_t i = 0; i < n; ++i) {
      nearest_centroid(features[i], model.centroids, &d2[i]);
      total += d2[i];
    }
    size_t pick = 0;
    if (total > 0.0) {
      const double r = rng.uniform() * total;
      double acc = 0.0;
      pick = n - 1;
      for (size_t i = 0; i < n; ++i) {
        acc += d2[i];
        if (acc >= r) {
          pick = i;
          break;
        }
      }
    } else {
      pick = static_cast<size_t>(rng.uniform_int(static_cast<int>(n)));
    }
    model.centroids.push_back(features[pick]);
  }

  // Lloyd iterations
  model.assignments.assign(n, -1);
  const size_t dim = features[0].size();
  for (int iter = 0; iter < 100; ++iter) {
    bool changed = false;
    double inertia = 0.0;
    for (size_t i = 0; i < n; ++i) {
      double d;
      const int a = nearest_centroid(features[i], model.centroids, &d);
      if (a != model.assignments[i]) changed = true;
      model.assignments[i] = a;
      inertia += d;
    }
    model.inertia = inertia;
    model.inertia_trace.push_back(inertia);
    if (!changed && iter > 0) break;

    std::vector<std::vector<double>> sums(static_cast<size_t>(k),
                                          std::vector<double>(dim, 0.0));
    std::vector<int> counts(static_cast<size_t>(k), 0);
    for (size_t i = 0; i < n; ++i) {
      const auto a = static_cast<size_t>(model.assignments[i]);
      counts[a]++;
      for (size_t d = 0; d < dim; ++d) sums[a][d] += features[i][d];
    }
    for (int c = 0; c < k; ++c) {
      if (counts[static_cast<size_t>(c)] == 0) {
        // reseed to the point farthest from its assigned centroid
        size_t far = 0;
        double fd = -1.0;
        for (size_t i = 0; i < n; ++i) {
          const double d =
              sq_dist(features[i], model.centroids[static_cast<size_t>(model.assignments[i])]);
          if (d > fd) {
            fd = d;
            far = i;
          }
        }
        model.centroids[static_cast<size_t>(c)] = features[far];
        changed = true;
      } else {
        for (size_t d = 0; d < dim; ++d)
          model.centroids[static_cast<size_t>(c)][d] = static_cast<float>(
              sums[static_cast<size_t>(c)][d] / counts[static_cast<size_t>(c)]);
      }
    }
    if (!changed) break;
  }

  // final assignment pass so the invariant (nearest centroid) holds exactly
  double inertia = 0.0;
  for (size_t i = 0; i < n; ++i) {
    double d;
    model.assignments[i] = nearest_centroid(features[i], model.centroids, &d);
    inertia += d;
  }
  model.inertia = inertia;
  return model;
}

std::pair<int, int> select_cluster_pair(const ClusterModel& model) {
  check(model.k >= 2, "select_cluster_pair: needs k >= 2");
  const auto sizes = model.sizes();
  int a = 0;
  for (int c = 1; c < model.k; ++c)
    if (sizes[static_cast<size_t>(c)] > sizes[static_cast<size_t>(a)]) a = c;
  int b = -1;
  for (int c = 0; c < model.k; ++c) {
    if (c == a) continue;
    if (b < 0 || sizes[static_cast<size_t>(c)] < sizes[static_cast<size_t>(b)]) b = c;
  }
  return {a, b};
}

double cluster_purity(const std::vector<int>& assignments, const std::vector<int>& labels,
                      int k) {
  check(assignments.size() == labels.size(), "cluster_purity: length mismatch");
  int max_label = 0;
  for (int l : labels) max_label = std::max(max_label, l);
  std::vector<std::vector<int>> counts(static_cast<size_t>(k),
                                       std::vector<int>(static_cast<size_t>(max_label + 1), 0));
  for (size_t i = 0; i < assignments.size(); ++i)
    counts[static_cast<size_t>(assignments[i])][static_cast<size_t>(labels[i])]++;
  int64_t majority = 0;
  for (int c = 0; c < k; ++c) {
    int best = 0;
    for (int l = 0; l <= max_label; ++l)
      best = std::max(best, counts[static_cast<size_t>(c)][static_cast<size_t>(l)]);
    majority += best;
  }
  return static_cast<double>(majority) / static_cast<double>(assignments.size());
}

void write_cluster_csv(const ClusterModel& model, const std::vector<std::vector<float>>& features,
                       const std::string& path) {
  std::ofstream f(path, std::ios::trunc);
  check(f.good(), "write_cluster_csv: cannot open '" + path + "'");
  f << "record_id,cluster,distance\n";
  char buf[64];
  for (size_t i = 0; i < features.size(); ++i) {
    const double d = std::sqrt(
        sq_dist(features[i], model.centroids[static_cast<size_t>(model.assignments[i])]));
    std::snprintf(buf, sizeof(buf), "%zu,%d,%.8f\n", i, model.assignments[i], d);
    f << buf;
  }
}

}  // namespace san
