#include "spacing/geometry.hpp"

#include <cmath>
#include <random>
#include <string>

#include "spacing/error.hpp"
#include "spacing/random.hpp"

namespace spacing {

namespace {

void require_same_size(Eigen::Index a, Eigen::Index b, const char* what) {
  if (a != b) {
    throw Error(ErrorCode::DimensionMismatch,
                std::string(what) + ": " + std::to_string(a) + " vs " + std::to_string(b));
  }
}

}  // namespace

PointConfiguration::PointConfiguration(Eigen::MatrixXd points) : points_(std::move(points)) {
  if (points_.rows() < 2 || points_.cols() < 1) {
    throw Error(ErrorCode::InvalidArgument,
                "a point configuration needs at least 2 points of dimension >= 1");
  }
  if (!points_.allFinite()) {
    throw Error(ErrorCode::InvalidArgument, "point configuration has non-finite coordinates");
  }
}

double PointConfiguration::distance(Eigen::Index i, Eigen::Index j) const {
  return (points_.row(i) - points_.row(j)).norm();
}

double PointConfiguration::max_pairwise_distance() const {
  double best = 0.0;
  for (Eigen::Index i = 0; i < count(); ++i) {
    for (Eigen::Index j = i + 1; j < count(); ++j) {
      best = std::max(best, distance(i, j));
    }
  }
  return best;
}

DissimilarityMatrix::DissimilarityMatrix(Eigen::MatrixXd delta, double alpha, double p_dist)
    : delta_(std::move(delta)), alpha_(alpha), p_dist_(p_dist) {}

DissimilarityMatrix DissimilarityMatrix::uniform(Eigen::Index c, double value) {
  if (c < 2) throw Error(ErrorCode::InvalidArgument, "dissimilarity needs c >= 2");
  if (!(value > 0.0) || !std::isfinite(value)) {
    throw Error(ErrorCode::InvalidArgument, "target distance must be positive and finite");
  }
  Eigen::MatrixXd delta = Eigen::MatrixXd::Constant(c, c, value);
  delta.diagonal().setZero();
  return DissimilarityMatrix(std::move(delta), 1.0, value);
}

WeightMatrix::WeightMatrix(Eigen::MatrixXd w) : w_(std::move(w)) {
  if (w_.rows() != w_.cols() || w_.rows() < 2) {
    throw Error(ErrorCode::InvalidArgument, "weights must be square with at least 2 rows");
  }
  if (!w_.allFinite() || (w_.array() < 0.0).any()) {
    throw Error(ErrorCode::InvalidArgument, "weights must be finite and non-negative");
  }
  if (w_.diagonal().cwiseAbs().maxCoeff() != 0.0) {
    throw Error(ErrorCode::InvalidArgument, "weights must be hollow");
  }
  if ((w_ - w_.transpose()).cwiseAbs().maxCoeff() != 0.0) {
    throw Error(ErrorCode::InvalidArgument, "weights must be symmetric");
  }
}

WeightMatrix WeightMatrix::unit(Eigen::Index c) {
  Eigen::MatrixXd w = Eigen::MatrixXd::Ones(c, c);
  w.diagonal().setZero();
  return WeightMatrix(std::move(w));
}

bool WeightMatrix::is_uniform() const {
  if (size() < 2) return false;
  const double first = w_(0, 1);
  if (!(first > 0.0)) return false;
  for (Eigen::Index i = 0; i < size(); ++i) {
    for (Eigen::Index j = 0; j < size(); ++j) {
      if (i != j && w_(i, j) != first) return false;
    }
  }
  return true;
}

void SolverSettings::validate() const {
  if (!(epsilon > 0.0)) throw Error(ErrorCode::InvalidArgument, "epsilon must be positive");
  if (max_iterations < 1) throw Error(ErrorCode::InvalidArgument, "max_iterations must be >= 1");
}

DissimilarityMatrix build_dissimilarity(const PointConfiguration& prototypes, double alpha) {
  if (!(alpha > 1.0) || !std::isfinite(alpha)) {
    throw Error(ErrorCode::InvalidAlpha, "alpha must exceed 1, got " + std::to_string(alpha));
  }
  const double p_dist = prototypes.max_pairwise_distance();
  if (!(p_dist > 0.0)) {
    throw Error(ErrorCode::DegeneratePrototypes, "all prototypes coincide");
  }
  const Eigen::Index c = prototypes.count();
  Eigen::MatrixXd delta = Eigen::MatrixXd::Constant(c, c, alpha * p_dist);
  delta.diagonal().setZero();
  return DissimilarityMatrix(std::move(delta), alpha, p_dist);
}

double stress(const PointConfiguration& config, const DissimilarityMatrix& delta,
              const WeightMatrix& weights) {
  require_same_size(config.count(), delta.size(), "configuration vs dissimilarity");
  require_same_size(config.count(), weights.size(), "configuration vs weights");
  double total = 0.0;
  for (Eigen::Index i = 0; i < config.count(); ++i) {
    for (Eigen::Index j = i + 1; j < config.count(); ++j) {
      const double r = config.distance(i, j) - delta.delta()(i, j);
      total += weights.w()(i, j) * r * r;
    }
  }
  return total;
}

Eigen::MatrixXd b_matrix(const PointConfiguration& support, const DissimilarityMatrix& delta) {
  require_same_size(support.count(), delta.size(), "support vs dissimilarity");
  const Eigen::Index c = support.count();
  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(c, c);
  for (Eigen::Index i = 0; i < c; ++i) {
    for (Eigen::Index j = i + 1; j < c; ++j) {
      const double d = support.distance(i, j);
      const double v = d != 0.0 ? delta.delta()(i, j) / d : 0.0;
      b(i, j) = v;
      b(j, i) = v;
    }
  }
  for (Eigen::Index i = 0; i < c; ++i) {
    double off = 0.0;
    for (Eigen::Index j = 0; j < c; ++j) {
      if (j != i) off += b(i, j);
    }
    b(i, i) = -off;
  }
  return b;
}

PointConfiguration majorization_step(const PointConfiguration& support,
                                     const DissimilarityMatrix& delta,
                                     const WeightMatrix& weights) {
  require_same_size(support.count(), weights.size(), "support vs weights");
  if (!weights.is_uniform()) {
    throw Error(ErrorCode::UnsupportedWeights, "only equal off-diagonal weights are supported");
  }
  const auto c = static_cast<double>(support.count());
  Eigen::MatrixXd next = b_matrix(support, delta) * support.points() / c;
  // Zero in exact arithmetic (B has zero row sums); removes rounding drift.
  next.rowwise() -= next.colwise().mean();
  return PointConfiguration(std::move(next));
}

SolverResult solve_equidistant(const DissimilarityMatrix& delta, Eigen::Index dim,
                               const SolverSettings& settings) {
  settings.validate();
  if (dim < 1) throw Error(ErrorCode::InvalidArgument, "dimension must be >= 1");
  const double target = delta.target();
  const Eigen::Index c = delta.size();
  const WeightMatrix weights = WeightMatrix::unit(c);

  Rng rng(settings.seed);
  std::uniform_real_distribution<double> coord(-target, target);
  Eigen::MatrixXd start(c, dim);
  for (Eigen::Index i = 0; i < c; ++i) {
    for (Eigen::Index k = 0; k < dim; ++k) start(i, k) = coord(rng);
  }

  PointConfiguration current(std::move(start));
  std::vector<double> history;
  if (settings.record_history) history.push_back(stress(current, delta, weights));

  int iterations = 0;
  double displacement = 0.0;
  bool converged = false;
  while (iterations < settings.max_iterations) {
    PointConfiguration next(-majorization_step(current, delta, weights).points());
    displacement = (next.points() - current.points()).cwiseAbs().maxCoeff();
    current = std::move(next);
    ++iterations;
    if (settings.record_history) history.push_back(stress(current, delta, weights));
    if (displacement <= settings.epsilon) {
      converged = true;
      break;
    }
  }

  const double final_stress = stress(current, delta, weights);
  return SolverResult{std::move(current), delta,          iterations, final_stress,
                      displacement,       converged,      std::move(history)};
}

SolverResult get_equidistant_points(const PointConfiguration& prototypes, double alpha,
                                    const SolverSettings& settings) {
  return solve_equidistant(build_dissimilarity(prototypes, alpha), prototypes.dim(), settings);
}

double max_relative_deviation(const PointConfiguration& config, double target) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < config.count(); ++i) {
    for (Eigen::Index j = i + 1; j < config.count(); ++j) {
      worst = std::max(worst, std::abs(config.distance(i, j) - target) / target);
    }
  }
  return worst;
}

}  // namespace spacing
