#include "spacing/kmeans.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <string>

#include "spacing/error.hpp"
#include "spacing/random.hpp"

namespace spacing {

namespace {

Eigen::MatrixXd seed_plus_plus(const Eigen::MatrixXd& data, int k, Rng& rng) {
  const Eigen::Index n = data.rows();
  Eigen::MatrixXd centers(k, data.cols());
  std::uniform_int_distribution<Eigen::Index> first(0, n - 1);
  centers.row(0) = data.row(first(rng));

  Eigen::VectorXd nearest_sq = (data.rowwise() - centers.row(0)).rowwise().squaredNorm();
  for (int c = 1; c < k; ++c) {
    const double total = nearest_sq.sum();
    Eigen::Index pick = 0;
    if (total > 0.0) {
      std::uniform_real_distribution<double> u(0.0, total);
      double target = u(rng);
      pick = n - 1;
      for (Eigen::Index i = 0; i < n; ++i) {
        target -= nearest_sq(i);
        if (target < 0.0 && nearest_sq(i) > 0.0) {
          pick = i;
          break;
        }
      }
      // Guard against landing on an already-covered row through rounding.
      while (nearest_sq(pick) == 0.0 && pick > 0) --pick;
    } else {
      pick = first(rng);
    }
    centers.row(c) = data.row(pick);
    nearest_sq = nearest_sq.cwiseMin((data.rowwise() - centers.row(c)).rowwise().squaredNorm());
  }
  return centers;
}

double assign(const Eigen::MatrixXd& data, const Eigen::MatrixXd& centroids,
              std::vector<int>& labels) {
  double inertia = 0.0;
  for (Eigen::Index i = 0; i < data.rows(); ++i) {
    int best = 0;
    double best_sq = std::numeric_limits<double>::infinity();
    for (Eigen::Index c = 0; c < centroids.rows(); ++c) {
      const double sq = (data.row(i) - centroids.row(c)).squaredNorm();
      if (sq < best_sq) {
        best_sq = sq;
        best = static_cast<int>(c);
      }
    }
    labels[static_cast<std::size_t>(i)] = best;
    inertia += best_sq;
  }
  return inertia;
}

KMeansResult lloyd(const Eigen::MatrixXd& data, int k, const KMeansOptions& options,
                   std::uint64_t seed) {
  Rng rng(seed);
  KMeansResult result;
  result.centroids = seed_plus_plus(data, k, rng);
  result.labels.assign(static_cast<std::size_t>(data.rows()), 0);

  double previous = std::numeric_limits<double>::infinity();
  for (int it = 0; it < options.max_iterations; ++it) {
    const double inertia = assign(data, result.centroids, result.labels);
    if (options.record_history) result.inertia_history.push_back(inertia);
    result.inertia = inertia;
    result.iterations = it + 1;

    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, data.cols());
    Eigen::VectorXd counts = Eigen::VectorXd::Zero(k);
    for (Eigen::Index i = 0; i < data.rows(); ++i) {
      const int c = result.labels[static_cast<std::size_t>(i)];
      sums.row(c) += data.row(i);
      counts(c) += 1.0;
    }
    for (int c = 0; c < k; ++c) {
      if (counts(c) > 0.0) result.centroids.row(c) = sums.row(c) / counts(c);
    }

    const bool settled =
        std::isfinite(previous) && previous - inertia <= options.relative_tolerance * previous;
    previous = inertia;
    if (settled || inertia == 0.0) break;
  }
  // Labels must agree with the returned centroids.
  result.inertia = assign(data, result.centroids, result.labels);
  if (options.record_history) result.inertia_history.push_back(result.inertia);
  return result;
}

}  // namespace

KMeansResult kmeans(const Eigen::MatrixXd& data, int k, const KMeansOptions& options) {
  if (k < 1) throw Error(ErrorCode::InvalidArgument, "k must be >= 1");
  if (data.rows() < k) {
    throw Error(ErrorCode::TooFewSamples, std::to_string(data.rows()) + " samples for k = " +
                                              std::to_string(k));
  }
  if (options.max_iterations < 1 || options.restarts < 1) {
    throw Error(ErrorCode::InvalidArgument, "max_iterations and restarts must be >= 1");
  }
  KMeansResult best = lloyd(data, k, options, options.seed);
  for (int r = 1; r < options.restarts; ++r) {
    KMeansResult candidate = lloyd(data, k, options, derive_seed(options.seed, r));
    if (candidate.inertia < best.inertia) best = std::move(candidate);
  }
  return best;
}

std::vector<int> nearest_rows(const Eigen::MatrixXd& data, const Eigen::MatrixXd& centroids) {
  if (data.cols() != centroids.cols()) {
    throw Error(ErrorCode::DimensionMismatch,
                "data has " + std::to_string(data.cols()) + " columns, centroids " +
                    std::to_string(centroids.cols()));
  }
  std::vector<int> labels(static_cast<std::size_t>(data.rows()), 0);
  if (centroids.rows() > 0) assign(data, centroids, labels);
  return labels;
}

}  // namespace spacing
