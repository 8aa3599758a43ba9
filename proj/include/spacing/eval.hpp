#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "spacing/kmeans.hpp"

namespace spacing {

/// Minimum-cost perfect matching on a square cost matrix (Hungarian method,
/// O(n^3)). Returns column index matched to each row.
std::vector<int> solve_assignment(const Eigen::MatrixXd& cost);

/// Lloyd's k-means labels over latents. Throws TooFewSamples when n < k.
/// `restarts` independent seeded starts are run and the lowest inertia kept.
std::vector<int> kmeans_infer(const Eigen::MatrixXd& latents, int k, std::uint64_t seed,
                              int restarts = 10);

/// Same as kmeans_infer but returns the full result (inertia trace included
/// when options.record_history is set).
KMeansResult kmeans_infer_detailed(const Eigen::MatrixXd& latents, int k,
                                   const KMeansOptions& options);

/// Counts of (predicted, true) pairs over densely re-indexed ids.
struct Contingency {
  Eigen::MatrixXd counts;  // predicted clusters x true classes
  std::size_t n = 0;
};

Contingency contingency(const std::vector<int>& predicted, const std::vector<int>& truth);

/// Best fraction of matches over injective cluster-to-class maps, solved as a
/// linear assignment on the zero-padded confusion matrix. Throws LengthMismatch.
double clustering_accuracy(const std::vector<int>& predicted, const std::vector<int>& truth);

/// I(U;V) / sqrt(H(U) H(V)) with natural logs. Identical partitions score 1;
/// otherwise a zero marginal entropy scores 0. Throws LengthMismatch.
double nmi(const std::vector<int>& predicted, const std::vector<int>& truth);

struct ClusteringReport {
  std::vector<int> predicted;
  std::vector<int> truth;
  double ca = 0.0;
  double nmi = 0.0;
  int k = 0;
  std::uint64_t seed = 0;

  /// {"ca": ..., "nmi": ..., "k": ..., "seed": ..., "n": ...}
  std::string to_json() const;
};

ClusteringReport make_report(std::vector<int> predicted, std::vector<int> truth, int k,
                             std::uint64_t seed);

}  // namespace spacing
