#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

namespace spacing {

/// A set of c points in R^z, one point per row. Used for class prototypes,
/// equidistant anchors, and majorization supports alike.
class PointConfiguration {
public:
  /// Throws InvalidArgument unless rows >= 2, cols >= 1 and every entry is finite.
  explicit PointConfiguration(Eigen::MatrixXd points);

  const Eigen::MatrixXd& points() const noexcept { return points_; }
  Eigen::Index count() const noexcept { return points_.rows(); }
  Eigen::Index dim() const noexcept { return points_.cols(); }

  Eigen::RowVectorXd point(Eigen::Index i) const { return points_.row(i); }
  double distance(Eigen::Index i, Eigen::Index j) const;

  /// Largest Euclidean distance over all pairs of rows.
  double max_pairwise_distance() const;

private:
  Eigen::MatrixXd points_;
};

/// Target pairwise distances. Built by this library with every off-diagonal
/// entry equal to alpha * p_dist.
class DissimilarityMatrix {
public:
  /// c x c matrix with `value` off the diagonal and zeros on it.
  static DissimilarityMatrix uniform(Eigen::Index c, double value);

  const Eigen::MatrixXd& delta() const noexcept { return delta_; }
  double alpha() const noexcept { return alpha_; }
  double p_dist() const noexcept { return p_dist_; }
  /// The common off-diagonal target distance.
  double target() const noexcept { return alpha_ * p_dist_; }
  Eigen::Index size() const noexcept { return delta_.rows(); }

private:
  friend DissimilarityMatrix build_dissimilarity(const PointConfiguration&, double);
  DissimilarityMatrix(Eigen::MatrixXd delta, double alpha, double p_dist);

  Eigen::MatrixXd delta_;
  double alpha_;
  double p_dist_;
};

/// Symmetric, hollow, non-negative stress weights.
class WeightMatrix {
public:
  /// Throws InvalidArgument when w is not square, symmetric, hollow and non-negative.
  explicit WeightMatrix(Eigen::MatrixXd w);
  static WeightMatrix unit(Eigen::Index c);

  const Eigen::MatrixXd& w() const noexcept { return w_; }
  Eigen::Index size() const noexcept { return w_.rows(); }
  /// True when every off-diagonal weight is the same positive value.
  bool is_uniform() const;

private:
  Eigen::MatrixXd w_;
};

struct SolverSettings {
  double epsilon = 1e-8;
  int max_iterations = 10'000;
  std::uint64_t seed = 0;
  /// Keep the stress value after every iteration in SolverResult::stress_history.
  bool record_history = false;

  void validate() const;
};

struct SolverResult {
  PointConfiguration anchors;
  DissimilarityMatrix delta;
  int iterations = 0;
  double final_stress = 0.0;
  /// Last infinity-norm coordinate displacement.
  double final_displacement = 0.0;
  /// False means max_iterations was reached with displacement > epsilon (NotConverged).
  bool converged = false;
  /// stress_history[0] is the stress of the random start; entry t the stress after step t.
  std::vector<double> stress_history;
};

DissimilarityMatrix build_dissimilarity(const PointConfiguration& prototypes, double alpha);

/// Weighted raw stress: sum over i<j of w_ij (d_ij - delta_ij)^2.
double stress(const PointConfiguration& config, const DissimilarityMatrix& delta,
              const WeightMatrix& weights);

/// B(Y) with b_ij = delta_ij / d_ij(Y) off the diagonal (0 for coincident
/// points) and b_ii = -sum_{j!=i} b_ij. Symmetric with zero row sums.
///
/// With this sign, (1/c) B(Y) Y is the classical Guttman transform followed by
/// the point reflection x -> -x. The reflection is an isometry, so distances
/// and stress of the update are unaffected.
Eigen::MatrixXd b_matrix(const PointConfiguration& support, const DissimilarityMatrix& delta);

/// One majorization step: (1/c) B(Y) Y, re-centered at the origin.
/// Stress never increases. Only equal off-diagonal weights are supported.
PointConfiguration majorization_step(const PointConfiguration& support,
                                     const DissimilarityMatrix& delta,
                                     const WeightMatrix& weights);

/// Iterates majorization steps from a seeded random start drawn uniformly
/// from [-delta, delta]^z until the largest coordinate change is <= epsilon.
/// Each step is negated before comparison so that successive iterates share
/// orientation (see b_matrix); without it the iterates alternate in sign.
SolverResult solve_equidistant(const DissimilarityMatrix& delta, Eigen::Index dim,
                               const SolverSettings& settings);

/// Anchors that are pairwise alpha * p_dist apart, in the prototypes' space.
SolverResult get_equidistant_points(const PointConfiguration& prototypes, double alpha,
                                    const SolverSettings& settings);

/// Largest |d_ij - delta| / delta over all pairs.
double max_relative_deviation(const PointConfiguration& config, double target);

}  // namespace spacing
