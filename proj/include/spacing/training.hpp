#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "spacing/data.hpp"
#include "spacing/model.hpp"
#include "spacing/prototypes.hpp"

namespace spacing {

enum class Regime { single_stage, two_stage };
enum class PrototypePolicy { novel_only, all_classes };

std::string_view to_string(Regime regime) noexcept;
std::string_view to_string(PrototypePolicy policy) noexcept;
Regime parse_regime(std::string_view name);
PrototypePolicy parse_prototype_policy(std::string_view name);

struct LossWeights {
  double spacing = 1.0;
  double cross_entropy = 1.0;
  double pairwise = 1.0;
  double consistency = 1.0;
};

struct TrainingConfig {
  /// Epochs of spacing / discovery training (phase 2, or the single-stage run).
  int epochs = 30;
  /// Epochs of labeled-only training in two-stage phase 1; 0 means `epochs`.
  int labeled_epochs = 0;
  int batch_size = 128;
  double learning_rate = 1e-2;
  double alpha = 1.5;
  double epsilon = 1e-8;
  int solver_max_iterations = 10'000;
  std::uint64_t seed = 0;
  LossWeights weights;
  Regime regime = Regime::two_stage;
  PrototypePolicy prototype_policy = PrototypePolicy::novel_only;
  TransportOptions transport;
  /// Isometric placement of the solved anchors relative to the prototypes.
  AnchorAlignment anchor_alignment = AnchorAlignment::rotate;
  double rho = 0.9;
  /// Augmentation noise as a fraction of each feature's standard deviation.
  double augment_noise_sigma = 0.1;
  bool recompute_anchors_each_epoch = false;
  /// Seeded k-means runs used to place the initial prototypes (best inertia kept).
  int prototype_init_restarts = 1;
  /// Number of novel classes in the unlabeled pool (assumed known).
  int novel_classes = 0;
  std::vector<Eigen::Index> hidden_widths{64, 64};
  Eigen::Index latent_dim = 16;

  /// Throws InvalidArgument on any out-of-range field.
  void validate() const;
  int phase_one_epochs() const noexcept { return labeled_epochs > 0 ? labeled_epochs : epochs; }
};

struct EpochRecord {
  std::string phase;
  int epoch = 0;
  int batches = 0;
  /// Batch means of each loss term (0 when the term is inactive in this phase).
  double spacing_loss = 0.0;
  double cross_entropy_loss = 0.0;
  double pairwise_loss = 0.0;
  double consistency_loss = 0.0;
  /// Frobenius norm of the prototype change over the epoch.
  double prototype_displacement = 0.0;
  /// Rows whose nearest prototype changed between the pre- and post-update assignment.
  std::size_t assignment_changes = 0;
  std::vector<std::size_t> batch_assignment_changes;
  /// Anchor solver diagnostics in effect for this epoch.
  double anchor_stress = 0.0;
  bool anchor_converged = true;

  bool all_finite() const;
};

struct TrainingTrace {
  std::vector<EpochRecord> epochs;

  bool all_finite() const;
  /// One JSON object per epoch, newline terminated.
  std::string to_jsonl() const;
  bool operator==(const TrainingTrace& other) const { return to_jsonl() == other.to_jsonl(); }
};

struct SpacingResult {
  FeatureExtractor extractor;
  PrototypeState state;
  TrainingTrace trace;
};

/// The alternating prototype/representation loop: k-means prototypes, a single
/// anchor solve, then per minibatch an MSE pull of latents toward their nearest
/// prototype followed by sequential prototype transport toward the anchors.
/// `classes` is the prototype count c.
SpacingResult learning_with_spacing(FeatureExtractor extractor, const Eigen::MatrixXd& data,
                                    int classes, const TrainingConfig& config);

struct TrainingResult {
  ModelBundle model;
  TrainingTrace trace;
  std::optional<PrototypeState> prototypes;
};

/// Fresh backbone (d -> hidden -> latent_dim) with a labeled head sized to the
/// labeled classes (if any) and an unlabeled head of novel_classes outputs.
ModelBundle make_model(Eigen::Index input_dim, int labeled_classes, const TrainingConfig& config);

/// Cross-entropy training of backbone + labeled head on labeled rows only.
/// Labels are mapped to head outputs in ascending class-id order.
TrainingTrace train_labeled(ModelBundle& model, const LabeledView& labeled,
                            const TrainingConfig& config, int epochs);

/// Fraction of labeled rows whose arg-max head output matches the label.
double labeled_accuracy(const ModelBundle& model, const LabeledView& labeled);

/// Called once phase 1 is complete, before any unlabeled row is read.
using PhaseCallback = std::function<void(const ModelBundle&)>;

/// Phase 1: labeled cross-entropy. Phase 2: unlabeled rows only, with spacing,
/// pairwise pseudo-label and consistency losses on backbone + unlabeled head.
TrainingResult train_two_stage(const LabeledView& labeled, const UnlabeledView& unlabeled,
                               const TrainingConfig& config,
                               const PhaseCallback& after_phase_one = {});

/// Continue a two-stage run from a phase-1 model (phase 2 only).
TrainingResult train_discovery(ModelBundle model, const UnlabeledView& unlabeled,
                               const TrainingConfig& config);

/// Labeled and unlabeled batches interleaved over a shared backbone.
TrainingResult train_single_stage(const LabeledView& labeled, const UnlabeledView& unlabeled,
                                  const TrainingConfig& config);

/// Backbone latents of the unlabeled rows (for k-means inference).
Eigen::MatrixXd unlabeled_latents(const ModelBundle& model, const UnlabeledView& unlabeled);

}  // namespace spacing
