#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

namespace spacing {

struct KMeansOptions {
  std::uint64_t seed = 0;
  int max_iterations = 300;
  /// Stop once the relative inertia decrease of an iteration falls below this.
  double relative_tolerance = 1e-6;
  /// Independent k-means++ starts; the lowest final inertia wins (first on ties).
  int restarts = 1;
  /// Record the inertia after every assignment step of the winning run.
  bool record_history = false;
};

struct KMeansResult {
  Eigen::MatrixXd centroids;  // k x dim
  std::vector<int> labels;
  double inertia = 0.0;
  int iterations = 0;
  std::vector<double> inertia_history;
};

/// Lloyd's algorithm with k-means++ seeding. Ties between equally near
/// centroids go to the lowest index; an emptied cluster keeps its centroid.
/// Throws TooFewSamples when rows < k.
KMeansResult kmeans(const Eigen::MatrixXd& data, int k, const KMeansOptions& options);

/// Index of the nearest row of `centroids` for every row of `data` (lowest index on ties).
std::vector<int> nearest_rows(const Eigen::MatrixXd& data, const Eigen::MatrixXd& centroids);

}  // namespace spacing
