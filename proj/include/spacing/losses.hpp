#pragma once

#include <vector>

#include <Eigen/Dense>

#include "spacing/geometry.hpp"
#include "spacing/prototypes.hpp"

namespace spacing {

/// A loss value and its gradient with respect to the differentiated input.
struct LossValue {
  double value = 0.0;
  Eigen::MatrixXd input_gradient;
};

/// Probabilities are clamped into [kProbabilityFloor, 1 - kProbabilityFloor]
/// before any logarithm.
inline constexpr double kProbabilityFloor = 1e-7;

/// (1/n) sum_i ||z_i - p_{a_i}||^2. Gradient is with respect to the latents;
/// prototypes are constants.
LossValue spacing_mse(const Eigen::MatrixXd& latents, const Assignment& assignment,
                      const PointConfiguration& prototypes);

/// -(1/n) sum_i log p_i[y_i]. The gradient is taken with respect to the
/// pre-softmax logits: (p - onehot(y)) / n. Throws InvalidLabel.
LossValue cross_entropy(const Eigen::MatrixXd& probabilities, const std::vector<int>& labels);

/// Binary cross-entropy over all unordered pairs between the head agreement
/// q_ij = <p_i, p_j> and the pseudo-label s_ij = [cos(z_i, z_j) >= rho].
/// Pseudo-labels are constants: the gradient is with respect to head_probs only.
/// Throws ZeroLatent for zero-norm latent rows.
LossValue pairwise_pseudo(const Eigen::MatrixXd& latents, const Eigen::MatrixXd& head_probs,
                          double rho);

/// Pseudo-label matrix used by pairwise_pseudo (1 on the diagonal).
Eigen::MatrixXi pairwise_pseudo_labels(const Eigen::MatrixXd& latents, double rho);

/// (1/n) sum_i ||p_i - p'_i||^2. input_gradient is with respect to `probs`; the
/// gradient with respect to `probs_augmented` is its negation.
LossValue consistency(const Eigen::MatrixXd& probs, const Eigen::MatrixXd& probs_augmented);

}  // namespace spacing
