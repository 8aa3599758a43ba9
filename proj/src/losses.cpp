#include "spacing/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "spacing/error.hpp"

namespace spacing {

LossValue spacing_mse(const Eigen::MatrixXd& latents, const Assignment& assignment,
                      const PointConfiguration& prototypes) {
  if (latents.cols() != prototypes.dim() ||
      static_cast<Eigen::Index>(assignment.size()) != latents.rows()) {
    throw Error(ErrorCode::DimensionMismatch, "spacing_mse shapes disagree");
  }
  const Eigen::Index n = latents.rows();
  LossValue loss{0.0, Eigen::MatrixXd::Zero(n, latents.cols())};
  if (n == 0) return loss;
  for (Eigen::Index i = 0; i < n; ++i) {
    const int a = assignment.indices[static_cast<std::size_t>(i)];
    if (a < 0 || a >= prototypes.count()) {
      throw Error(ErrorCode::DimensionMismatch, "assignment index out of range");
    }
    loss.input_gradient.row(i) = latents.row(i) - prototypes.points().row(a);
  }
  const double scale = 1.0 / static_cast<double>(n);
  loss.value = loss.input_gradient.squaredNorm() * scale;
  loss.input_gradient *= 2.0 * scale;
  return loss;
}

LossValue cross_entropy(const Eigen::MatrixXd& probabilities, const std::vector<int>& labels) {
  const Eigen::Index n = probabilities.rows();
  if (static_cast<Eigen::Index>(labels.size()) != n) {
    throw Error(ErrorCode::DimensionMismatch, "label count differs from probability rows");
  }
  LossValue loss{0.0, probabilities};
  if (n == 0) return loss;
  const double scale = 1.0 / static_cast<double>(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const int y = labels[static_cast<std::size_t>(i)];
    if (y < 0 || y >= probabilities.cols()) {
      throw Error(ErrorCode::InvalidLabel, "label " + std::to_string(y) + " outside [0, " +
                                               std::to_string(probabilities.cols()) + ")");
    }
    const double p = std::clamp(probabilities(i, y), kProbabilityFloor, 1.0);
    loss.value -= std::log(p);
    loss.input_gradient(i, y) -= 1.0;
  }
  loss.value *= scale;
  loss.input_gradient *= scale;
  return loss;
}

Eigen::MatrixXi pairwise_pseudo_labels(const Eigen::MatrixXd& latents, double rho) {
  const Eigen::VectorXd norms = latents.rowwise().norm();
  for (Eigen::Index i = 0; i < latents.rows(); ++i) {
    if (!(norms(i) > 0.0)) {
      throw Error(ErrorCode::ZeroLatent, "latent row " + std::to_string(i) + " has zero norm");
    }
  }
  const Eigen::MatrixXd unit = latents.array().colwise() / norms.array();
  const Eigen::MatrixXd cosine = unit * unit.transpose();
  return (cosine.array() >= rho).cast<int>().matrix();
}

LossValue pairwise_pseudo(const Eigen::MatrixXd& latents, const Eigen::MatrixXd& head_probs,
                          double rho) {
  const Eigen::Index n = latents.rows();
  if (head_probs.rows() != n) {
    throw Error(ErrorCode::DimensionMismatch, "latent and head rows differ");
  }
  if (n < 2) throw Error(ErrorCode::InvalidArgument, "pairwise loss needs at least 2 samples");
  if (!(rho > -1.0 && rho < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "rho must lie in (-1, 1)");
  }
  const Eigen::MatrixXi same = pairwise_pseudo_labels(latents, rho);
  const Eigen::MatrixXd agreement = head_probs * head_probs.transpose();

  LossValue loss{0.0, Eigen::MatrixXd::Zero(n, head_probs.cols())};
  const double pairs = static_cast<double>(n) * static_cast<double>(n - 1) / 2.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double raw = agreement(i, j);
      const double q = std::clamp(raw, kProbabilityFloor, 1.0 - kProbabilityFloor);
      const bool positive = same(i, j) != 0;
      loss.value -= positive ? std::log(q) : std::log(1.0 - q);
      if (raw > kProbabilityFloor && raw < 1.0 - kProbabilityFloor) {
        const double dq = positive ? -1.0 / q : 1.0 / (1.0 - q);
        loss.input_gradient.row(i) += dq * head_probs.row(j);
        loss.input_gradient.row(j) += dq * head_probs.row(i);
      }
    }
  }
  loss.value /= pairs;
  loss.input_gradient /= pairs;
  return loss;
}

LossValue consistency(const Eigen::MatrixXd& probs, const Eigen::MatrixXd& probs_augmented) {
  if (probs.rows() != probs_augmented.rows() || probs.cols() != probs_augmented.cols()) {
    throw Error(ErrorCode::DimensionMismatch, "consistency views differ in shape");
  }
  const Eigen::Index n = probs.rows();
  LossValue loss{0.0, probs - probs_augmented};
  if (n == 0) return loss;
  const double scale = 1.0 / static_cast<double>(n);
  loss.value = loss.input_gradient.squaredNorm() * scale;
  loss.input_gradient *= 2.0 * scale;
  return loss;
}

}  // namespace spacing
