#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace san {

struct ClusterModel {
  int k = 0;
  std::vector<std::vector<float>> centroids;
  std::vector<int> assignments;
  double inertia = 0.0;
  std::vector<double> inertia_trace;  // per Lloyd iteration

  std::vector<int> sizes() const;
};

// k-means++ seeding from a seeded RNG, then Lloyd iterations until the
// assignments are fixed or 100 iterations. Nearest-centroid ties break to
// the lowest centroid index; an empty cluster is reseeded to the point
// farthest from its assigned centroid.
ClusterModel kmeans_cluster(const std::vector<std::vector<float>>& features, int k,
                            uint64_t seed);

// L2-normalizes every feature row in place (zero rows stay zero).
void l2_normalize(std::vector<std::vector<float>>& features);

// (largest cluster, smallest cluster); ties break to the lower index, and
// the second pick is always distinct from the first.
std::pair<int, int> select_cluster_pair(const ClusterModel& model);

// Fraction of points whose cluster's majority label matches their own.
double cluster_purity(const std::vector<int>& assignments, const std::vector<int>& labels,
                      int k);

// CSV export: record_id,cluster,distance
void write_cluster_csv(const ClusterModel& model, const std::vector<std::vector<float>>& features,
                       const std::string& path);

}  // namespace san
