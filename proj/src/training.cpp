#include "spacing/training.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <string>

#include <json.hpp>

#include "spacing/error.hpp"
#include "spacing/geometry.hpp"
#include "spacing/losses.hpp"
#include "spacing/random.hpp"

namespace spacing {

namespace {

// Stream ids for derive_seed; every random draw in a run comes from one of these.
enum Stream : std::uint64_t {
  kModelStream = 1,
  kLabeledScheduleStream = 2,
  kUnlabeledScheduleStream = 3,
  kPrototypeStream = 4,
  kAugmentStream = 5,
  kAnchorStream = 100,
};

using Batches = std::vector<std::vector<Eigen::Index>>;

/// Seeded shuffle cut into batches; rows inside a batch keep dataset order.
Batches make_batches(Eigen::Index n, int batch_size, Rng& rng) {
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::shuffle(order.begin(), order.end(), rng);
  Batches batches;
  for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(batch_size)) {
    const auto end = std::min(order.size(), start + static_cast<std::size_t>(batch_size));
    std::vector<Eigen::Index> batch(order.begin() + static_cast<std::ptrdiff_t>(start),
                                    order.begin() + static_cast<std::ptrdiff_t>(end));
    std::sort(batch.begin(), batch.end());
    batches.push_back(std::move(batch));
  }
  return batches;
}

Eigen::RowVectorXd feature_noise_scale(const Eigen::MatrixXd& x, double fraction) {
  if (x.rows() == 0) return Eigen::RowVectorXd::Zero(x.cols());
  const Eigen::RowVectorXd mean = x.colwise().mean();
  const Eigen::RowVectorXd var =
      (x.rowwise() - mean).array().square().colwise().sum() / static_cast<double>(x.rows());
  return fraction * var.array().sqrt().matrix();
}

std::size_t count_changes(const Assignment& before, const Assignment& after) {
  std::size_t changes = 0;
  for (std::size_t i = 0; i < before.size(); ++i) {
    if (before.indices[i] != after.indices[i]) ++changes;
  }
  return changes;
}

struct BatchLosses {
  std::optional<double> spacing;
  std::optional<double> cross_entropy;
  std::optional<double> pairwise;
  std::optional<double> consistency;
  std::size_t assignment_changes = 0;
};

/// Running means of loss terms over the batches of one epoch.
class EpochAccumulator {
public:
  EpochAccumulator(std::string phase, int epoch) { record_.phase = std::move(phase); record_.epoch = epoch; }

  void add(const BatchLosses& b, bool had_spacing) {
    ++record_.batches;
    accumulate(b.spacing, spacing_);
    accumulate(b.cross_entropy, ce_);
    accumulate(b.pairwise, pairwise_);
    accumulate(b.consistency, consistency_);
    if (had_spacing) {
      record_.assignment_changes += b.assignment_changes;
      record_.batch_assignment_changes.push_back(b.assignment_changes);
    }
  }

  EpochRecord finish(double displacement, double anchor_stress, bool anchor_converged) {
    record_.spacing_loss = spacing_.mean();
    record_.cross_entropy_loss = ce_.mean();
    record_.pairwise_loss = pairwise_.mean();
    record_.consistency_loss = consistency_.mean();
    record_.prototype_displacement = displacement;
    record_.anchor_stress = anchor_stress;
    record_.anchor_converged = anchor_converged;
    return record_;
  }

private:
  struct Mean {
    double sum = 0.0;
    int count = 0;
    double mean() const { return count ? sum / count : 0.0; }
  };
  static void accumulate(const std::optional<double>& v, Mean& m) {
    if (v) {
      m.sum += *v;
      ++m.count;
    }
  }

  EpochRecord record_;
  Mean spacing_, ce_, pairwise_, consistency_;
};

/// Mutable training state shared by every regime: the model, the spacing
/// prototypes/anchors, and the anchor diagnostics.
class Session {
public:
  Session(ModelBundle& model, const TrainingConfig& config) : model_(model), config_(config) {}

  bool spacing_ready() const { return state_.has_value(); }
  const std::optional<PrototypeState>& state() const { return state_; }
  PrototypeState take_state() { return std::move(*state_); }
  double anchor_stress() const { return anchor_stress_; }
  bool anchor_converged() const { return anchor_converged_; }

  /// Prototype init from the pool latents, then the anchor solve.
  void init_spacing(const Eigen::MatrixXd& pool, int classes) {
    const Eigen::MatrixXd latents = encode(model_.backbone, pool);
    PointConfiguration prototypes =
        init_prototypes(latents, classes, derive_seed(config_.seed, kPrototypeStream),
                        config_.prototype_init_restarts);
    PointConfiguration anchors = solve_anchors(prototypes, 0);
    state_.emplace(std::move(prototypes), std::move(anchors));
  }

  void recompute_anchors(int epoch) {
    state_->anchors = solve_anchors(state_->prototypes, epoch);
  }

  Eigen::MatrixXd prototype_points() const { return state_->prototypes.points(); }

  /// One optimisation step on a batch followed, when `spacing` is set, by the
  /// re-forward, re-assignment and sequential prototype transport.
  BatchLosses step(const Eigen::MatrixXd& x, const std::vector<int>* labels,
                   const Eigen::MatrixXd* augmented, bool spacing, bool auxiliary,
                   int epoch, int batch) {
    BatchLosses out;
    const ForwardResult fwd = forward(model_.backbone, x);
    Eigen::MatrixXd latent_grad = Eigen::MatrixXd::Zero(fwd.latents.rows(), fwd.latents.cols());
    GradientSet backbone_grad;
    bool have_backbone_grad = false;
    auto add_backbone = [&](GradientSet g) {
      if (have_backbone_grad) {
        backbone_grad += g;
      } else {
        backbone_grad = std::move(g);
        have_backbone_grad = true;
      }
    };
    std::optional<AffineGradient> lab_grad, ulab_grad;
    auto add_affine = [](std::optional<AffineGradient>& acc, const AffineGradient& g) {
      if (acc) {
        acc->weight += g.weight;
        acc->bias += g.bias;
      } else {
        acc = g;
      }
    };

    Assignment before;
    if (spacing) {
      before = assign_nearest(fwd.latents, state_->prototypes);
      const LossValue mse = spacing_mse(fwd.latents, before, state_->prototypes);
      out.spacing = mse.value;
      if (config_.weights.spacing > 0.0) latent_grad += config_.weights.spacing * mse.input_gradient;
    }

    if (labels != nullptr && config_.weights.cross_entropy > 0.0) {
      const ClassifierHead& head = *model_.labeled_head;
      const HeadOutput ho = head_forward(head, fwd.latents);
      const LossValue ce = cross_entropy(ho.probabilities, *labels);
      out.cross_entropy = ce.value;
      const HeadGradient hg =
          head_backward(head, fwd.latents, config_.weights.cross_entropy * ce.input_gradient);
      latent_grad += hg.latents;
      add_affine(lab_grad, hg.parameters);
    }

    if (auxiliary && model_.unlabeled_head &&
        (config_.weights.pairwise > 0.0 || config_.weights.consistency > 0.0)) {
      const ClassifierHead& head = *model_.unlabeled_head;
      const HeadOutput ho = head_forward(head, fwd.latents);
      Eigen::MatrixXd prob_grad = Eigen::MatrixXd::Zero(ho.probabilities.rows(), ho.probabilities.cols());
      if (config_.weights.pairwise > 0.0 && x.rows() >= 2) {
        const LossValue pw = pairwise_pseudo(fwd.latents, ho.probabilities, config_.rho);
        out.pairwise = pw.value;
        prob_grad += config_.weights.pairwise * pw.input_gradient;
      }
      if (config_.weights.consistency > 0.0 && augmented != nullptr) {
        const ForwardResult fwd_aug = forward(model_.backbone, *augmented);
        const HeadOutput ho_aug = head_forward(head, fwd_aug.latents);
        const LossValue cons = consistency(ho.probabilities, ho_aug.probabilities);
        out.consistency = cons.value;
        prob_grad += config_.weights.consistency * cons.input_gradient;
        const HeadGradient hg_aug = head_backward(
            head, fwd_aug.latents,
            softmax_backward(ho_aug.probabilities, -config_.weights.consistency * cons.input_gradient));
        add_affine(ulab_grad, hg_aug.parameters);
        add_backbone(backward(model_.backbone, fwd_aug.cache, hg_aug.latents));
      }
      const HeadGradient hg =
          head_backward(head, fwd.latents, softmax_backward(ho.probabilities, prob_grad));
      latent_grad += hg.latents;
      add_affine(ulab_grad, hg.parameters);
    }

    for (const auto& v : {out.spacing, out.cross_entropy, out.pairwise, out.consistency}) {
      if (v && !std::isfinite(*v)) non_finite(epoch, batch);
    }

    add_backbone(backward(model_.backbone, fwd.cache, latent_grad));
    if (!backbone_grad.all_finite()) non_finite(epoch, batch);
    sgd_step(model_.backbone, backbone_grad, config_.learning_rate);
    if (lab_grad) sgd_step(*model_.labeled_head, *lab_grad, config_.learning_rate);
    if (ulab_grad) sgd_step(*model_.unlabeled_head, *ulab_grad, config_.learning_rate);

    if (spacing) {
      const Eigen::MatrixXd latents = encode(model_.backbone, x);
      if (!latents.allFinite()) non_finite(epoch, batch);
      const Assignment after = assign_nearest(latents, state_->prototypes);
      out.assignment_changes = count_changes(before, after);
      *state_ = update_prototypes(std::move(*state_), latents, after, config_.transport);
    }
    return out;
  }

private:
  PointConfiguration solve_anchors(const PointConfiguration& prototypes, int epoch) {
    SolverSettings settings;
    settings.epsilon = config_.epsilon;
    settings.max_iterations = config_.solver_max_iterations;
    settings.seed = derive_seed(config_.seed, kAnchorStream + static_cast<std::uint64_t>(epoch));
    SolverResult solved = get_equidistant_points(prototypes, config_.alpha, settings);
    anchor_stress_ = solved.final_stress;
    anchor_converged_ = solved.converged;
    return align_anchors(solved.anchors, prototypes, config_.anchor_alignment);
  }

  [[noreturn]] static void non_finite(int epoch, int batch) {
    throw Error(ErrorCode::NonFiniteLoss,
                "non-finite value at epoch " + std::to_string(epoch) + ", batch " + std::to_string(batch));
  }

  ModelBundle& model_;
  const TrainingConfig& config_;
  std::optional<PrototypeState> state_;
  double anchor_stress_ = 0.0;
  bool anchor_converged_ = true;
};

std::vector<int> dense_labels(const std::vector<int>& labels, const std::vector<int>& classes) {
  std::map<int, int> index;
  for (std::size_t k = 0; k < classes.size(); ++k) index[classes[k]] = static_cast<int>(k);
  std::vector<int> out;
  out.reserve(labels.size());
  for (int y : labels) out.push_back(index.at(y));
  return out;
}

double displacement(const Session& session, const Eigen::MatrixXd& before) {
  return session.spacing_ready() ? (session.prototype_points() - before).norm() : 0.0;
}

/// Phase 2 body shared by train_two_stage and train_discovery.
void run_discovery(ModelBundle& model, const UnlabeledView& unlabeled, const TrainingConfig& config,
                   TrainingResult& result) {
  if (unlabeled.empty()) throw Error(ErrorCode::InvalidArgument, "unlabeled pool is empty");
  Session session(model, config);
  const Eigen::MatrixXd pool = unlabeled.all_features();
  session.init_spacing(pool, config.novel_classes);
  const Eigen::RowVectorXd noise = feature_noise_scale(pool, config.augment_noise_sigma);

  Rng schedule(derive_seed(config.seed, kUnlabeledScheduleStream));
  Rng augment_rng(derive_seed(config.seed, kAugmentStream));
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    if (config.recompute_anchors_each_epoch && epoch > 0) session.recompute_anchors(epoch);
    const Eigen::MatrixXd start = session.prototype_points();
    EpochAccumulator acc("discovery", epoch);
    const Batches batches = make_batches(unlabeled.size(), config.batch_size, schedule);
    for (std::size_t b = 0; b < batches.size(); ++b) {
      const Eigen::MatrixXd x = unlabeled.rows(batches[b]);
      const Eigen::MatrixXd x_aug = augment_rows(x, noise, augment_rng);
      acc.add(session.step(x, nullptr, &x_aug, true, true, epoch, static_cast<int>(b)), true);
    }
    result.trace.epochs.push_back(
        acc.finish(displacement(session, start), session.anchor_stress(), session.anchor_converged()));
  }
  result.prototypes = session.state();
}

}  // namespace

std::string_view to_string(Regime regime) noexcept {
  return regime == Regime::single_stage ? "single" : "two-stage";
}

std::string_view to_string(PrototypePolicy policy) noexcept {
  return policy == PrototypePolicy::novel_only ? "novel_only" : "all_classes";
}

Regime parse_regime(std::string_view name) {
  if (name == "single" || name == "single_stage") return Regime::single_stage;
  if (name == "two-stage" || name == "two_stage") return Regime::two_stage;
  throw Error(ErrorCode::InvalidArgument, "unknown regime '" + std::string(name) + "'");
}

PrototypePolicy parse_prototype_policy(std::string_view name) {
  if (name == "novel_only") return PrototypePolicy::novel_only;
  if (name == "all_classes") return PrototypePolicy::all_classes;
  throw Error(ErrorCode::InvalidArgument, "unknown prototype policy '" + std::string(name) + "'");
}

void TrainingConfig::validate() const {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::InvalidArgument, what); };
  if (epochs < 1) fail("epochs must be >= 1");
  if (labeled_epochs < 0) fail("labeled_epochs must be >= 0");
  if (batch_size < 1) fail("batch_size must be >= 1");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) fail("learning_rate must be > 0");
  if (!(alpha > 1.0) || !std::isfinite(alpha)) fail("alpha must exceed 1");
  if (!(epsilon > 0.0)) fail("epsilon must be > 0");
  if (solver_max_iterations < 1) fail("solver_max_iterations must be >= 1");
  for (double w : {weights.spacing, weights.cross_entropy, weights.pairwise, weights.consistency}) {
    if (!(w >= 0.0) || !std::isfinite(w)) fail("loss weights must be finite and >= 0");
  }
  if (!(rho > -1.0 && rho < 1.0)) fail("rho must lie in (-1, 1)");
  if (!(augment_noise_sigma >= 0.0)) fail("augment_noise_sigma must be >= 0");
  if (!(transport.lambda >= 0.0 && transport.lambda <= 1.0)) fail("transport lambda must lie in [0, 1]");
  if (novel_classes < 0) fail("novel_classes must be >= 0");
  if (prototype_init_restarts < 1) fail("prototype_init_restarts must be >= 1");
  if (latent_dim < 1) fail("latent_dim must be >= 1");
  for (auto w : hidden_widths) {
    if (w < 1) fail("hidden widths must be >= 1");
  }
}

bool EpochRecord::all_finite() const {
  return std::isfinite(spacing_loss) && std::isfinite(cross_entropy_loss) &&
         std::isfinite(pairwise_loss) && std::isfinite(consistency_loss) &&
         std::isfinite(prototype_displacement) && std::isfinite(anchor_stress);
}

bool TrainingTrace::all_finite() const {
  return std::all_of(epochs.begin(), epochs.end(), [](const auto& e) { return e.all_finite(); });
}

std::string TrainingTrace::to_jsonl() const {
  std::string out;
  for (const auto& e : epochs) {
    nlohmann::ordered_json j;
    j["phase"] = e.phase;
    j["epoch"] = e.epoch;
    j["batches"] = e.batches;
    j["spacing_loss"] = e.spacing_loss;
    j["cross_entropy_loss"] = e.cross_entropy_loss;
    j["pairwise_loss"] = e.pairwise_loss;
    j["consistency_loss"] = e.consistency_loss;
    j["prototype_displacement"] = e.prototype_displacement;
    j["assignment_changes"] = e.assignment_changes;
    j["batch_assignment_changes"] = e.batch_assignment_changes;
    j["anchor_stress"] = e.anchor_stress;
    j["anchor_converged"] = e.anchor_converged;
    out += j.dump();
    out += '\n';
  }
  return out;
}

SpacingResult learning_with_spacing(FeatureExtractor extractor, const Eigen::MatrixXd& data,
                                    int classes, const TrainingConfig& config) {
  config.validate();
  if (data.rows() == 0) throw Error(ErrorCode::InvalidArgument, "no data to train on");
  ModelBundle model{std::move(extractor), std::nullopt, std::nullopt};
  Session session(model, config);
  session.init_spacing(data, classes);

  TrainingTrace trace;
  Rng schedule(derive_seed(config.seed, kUnlabeledScheduleStream));
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    if (config.recompute_anchors_each_epoch && epoch > 0) session.recompute_anchors(epoch);
    const Eigen::MatrixXd start = session.prototype_points();
    EpochAccumulator acc("spacing", epoch);
    const Batches batches = make_batches(data.rows(), config.batch_size, schedule);
    for (std::size_t b = 0; b < batches.size(); ++b) {
      Eigen::MatrixXd x(static_cast<Eigen::Index>(batches[b].size()), data.cols());
      for (std::size_t k = 0; k < batches[b].size(); ++k) {
        x.row(static_cast<Eigen::Index>(k)) = data.row(batches[b][k]);
      }
      acc.add(session.step(x, nullptr, nullptr, true, false, epoch, static_cast<int>(b)), true);
    }
    trace.epochs.push_back(
        acc.finish(displacement(session, start), session.anchor_stress(), session.anchor_converged()));
  }
  return SpacingResult{std::move(model.backbone), session.take_state(), std::move(trace)};
}

ModelBundle make_model(Eigen::Index input_dim, int labeled_classes, const TrainingConfig& config) {
  config.validate();
  std::vector<Eigen::Index> widths{input_dim};
  widths.insert(widths.end(), config.hidden_widths.begin(), config.hidden_widths.end());
  widths.push_back(config.latent_dim);
  const std::uint64_t seed = derive_seed(config.seed, kModelStream);
  ModelBundle model{FeatureExtractor::create(widths, seed), std::nullopt, std::nullopt};
  if (labeled_classes > 0) {
    model.labeled_head = ClassifierHead::create(config.latent_dim, labeled_classes, derive_seed(seed, 1000));
  }
  if (config.novel_classes > 0) {
    model.unlabeled_head =
        ClassifierHead::create(config.latent_dim, config.novel_classes, derive_seed(seed, 1001));
  }
  return model;
}

TrainingTrace train_labeled(ModelBundle& model, const LabeledView& labeled,
                            const TrainingConfig& config, int epochs) {
  config.validate();
  if (labeled.empty()) throw Error(ErrorCode::InvalidArgument, "labeled pool is empty");
  if (!model.labeled_head) throw Error(ErrorCode::InvalidArgument, "model has no labeled head");
  const std::vector<int> classes = labeled.classes();
  if (static_cast<Eigen::Index>(classes.size()) > model.labeled_head->classes()) {
    throw Error(ErrorCode::InvalidLabel, "more labeled classes than labeled-head outputs");
  }
  Session session(model, config);
  TrainingTrace trace;
  Rng schedule(derive_seed(config.seed, kLabeledScheduleStream));
  for (int epoch = 0; epoch < epochs; ++epoch) {
    EpochAccumulator acc("labeled", epoch);
    const Batches batches = make_batches(labeled.size(), config.batch_size, schedule);
    for (std::size_t b = 0; b < batches.size(); ++b) {
      const Eigen::MatrixXd x = labeled.rows(batches[b]);
      const std::vector<int> y = dense_labels(labeled.labels(batches[b]), classes);
      acc.add(session.step(x, &y, nullptr, false, false, epoch, static_cast<int>(b)), false);
    }
    trace.epochs.push_back(acc.finish(0.0, 0.0, true));
  }
  return trace;
}

double labeled_accuracy(const ModelBundle& model, const LabeledView& labeled) {
  if (!model.labeled_head || labeled.empty()) return 0.0;
  const std::vector<int> classes = labeled.classes();
  std::vector<Eigen::Index> all(static_cast<std::size_t>(labeled.size()));
  std::iota(all.begin(), all.end(), Eigen::Index{0});
  const std::vector<int> y = dense_labels(labeled.labels(all), classes);
  const HeadOutput out = head_forward(*model.labeled_head, encode(model.backbone, labeled.rows(all)));
  std::size_t correct = 0;
  for (Eigen::Index i = 0; i < out.probabilities.rows(); ++i) {
    Eigen::Index best = 0;
    out.probabilities.row(i).maxCoeff(&best);
    if (best == y[static_cast<std::size_t>(i)]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(labeled.size());
}

TrainingResult train_discovery(ModelBundle model, const UnlabeledView& unlabeled,
                               const TrainingConfig& config) {
  config.validate();
  if (config.novel_classes < 2) {
    throw Error(ErrorCode::InvalidArgument, "discovery needs novel_classes >= 2");
  }
  if (!model.unlabeled_head) {
    model.unlabeled_head = ClassifierHead::create(
        model.backbone.latent_dim(), config.novel_classes,
        derive_seed(derive_seed(config.seed, kModelStream), 1001));
  }
  TrainingResult result{std::move(model), {}, std::nullopt};
  run_discovery(result.model, unlabeled, config, result);
  return result;
}

TrainingResult train_two_stage(const LabeledView& labeled, const UnlabeledView& unlabeled,
                               const TrainingConfig& config, const PhaseCallback& after_phase_one) {
  config.validate();
  if (config.novel_classes < 2) {
    throw Error(ErrorCode::InvalidArgument, "two-stage training needs novel_classes >= 2");
  }
  const Eigen::Index dim = labeled.empty() ? unlabeled.dim() : labeled.dim();
  ModelBundle model = make_model(dim, static_cast<int>(labeled.classes().size()), config);

  TrainingResult result{std::move(model), {}, std::nullopt};
  if (!labeled.empty()) {
    result.trace = train_labeled(result.model, labeled, config, config.phase_one_epochs());
  }
  if (after_phase_one) after_phase_one(result.model);
  run_discovery(result.model, unlabeled, config, result);
  return result;
}

TrainingResult train_single_stage(const LabeledView& labeled, const UnlabeledView& unlabeled,
                                  const TrainingConfig& config) {
  config.validate();
  const std::vector<int> classes = labeled.classes();
  const Eigen::Index dim = labeled.empty() ? unlabeled.dim() : labeled.dim();
  ModelBundle model = make_model(dim, static_cast<int>(classes.size()), config);
  TrainingResult result{std::move(model), {}, std::nullopt};
  Session session(result.model, config);

  const bool all_classes = config.prototype_policy == PrototypePolicy::all_classes;
  const bool discover = !unlabeled.empty();
  if (discover) {
    if (config.novel_classes < 1) {
      throw Error(ErrorCode::InvalidArgument, "single-stage discovery needs novel_classes >= 1");
    }
    Eigen::MatrixXd pool = unlabeled.all_features();
    int c = config.novel_classes;
    if (all_classes && !labeled.empty()) {
      const Eigen::MatrixXd lab = labeled.all_features();
      Eigen::MatrixXd joined(pool.rows() + lab.rows(), pool.cols());
      joined << lab, pool;
      pool = std::move(joined);
      c += static_cast<int>(classes.size());
    }
    if (c >= 2) session.init_spacing(pool, c);
  }
  const bool spacing = session.spacing_ready();
  const Eigen::RowVectorXd noise =
      discover ? feature_noise_scale(unlabeled.all_features(), config.augment_noise_sigma)
               : Eigen::RowVectorXd();

  Rng lab_schedule(derive_seed(config.seed, kLabeledScheduleStream));
  Rng unlab_schedule(derive_seed(config.seed, kUnlabeledScheduleStream));
  Rng augment_rng(derive_seed(config.seed, kAugmentStream));
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    if (spacing && config.recompute_anchors_each_epoch && epoch > 0) session.recompute_anchors(epoch);
    const Eigen::MatrixXd start = spacing ? session.prototype_points() : Eigen::MatrixXd();
    EpochAccumulator acc("single_stage", epoch);
    const Batches lab_batches =
        labeled.empty() ? Batches{} : make_batches(labeled.size(), config.batch_size, lab_schedule);
    const Batches unlab_batches =
        discover ? make_batches(unlabeled.size(), config.batch_size, unlab_schedule) : Batches{};

    int b = 0;
    const std::size_t rounds = std::max(lab_batches.size(), unlab_batches.size());
    for (std::size_t r = 0; r < rounds; ++r) {
      if (r < lab_batches.size()) {
        const Eigen::MatrixXd x = labeled.rows(lab_batches[r]);
        const std::vector<int> y = dense_labels(labeled.labels(lab_batches[r]), classes);
        const bool lab_spacing = spacing && all_classes;
        acc.add(session.step(x, &y, nullptr, lab_spacing, false, epoch, b++), lab_spacing);
      }
      if (r < unlab_batches.size()) {
        const Eigen::MatrixXd x = unlabeled.rows(unlab_batches[r]);
        const Eigen::MatrixXd x_aug = augment_rows(x, noise, augment_rng);
        acc.add(session.step(x, nullptr, &x_aug, spacing, true, epoch, b++), spacing);
      }
    }
    result.trace.epochs.push_back(acc.finish(spacing ? (session.prototype_points() - start).norm() : 0.0,
                                             session.anchor_stress(), session.anchor_converged()));
  }
  result.prototypes = session.state();
  return result;
}

Eigen::MatrixXd unlabeled_latents(const ModelBundle& model, const UnlabeledView& unlabeled) {
  return encode(model.backbone, unlabeled.all_features());
}

}  // namespace spacing
