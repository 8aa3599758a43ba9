#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "spacing/random.hpp"

namespace spacing {

inline constexpr int kUnlabeled = -1;

/// Feature rows with an integer label per row; kUnlabeled marks the unlabeled pool.
struct Dataset {
  Eigen::MatrixXd features;
  std::vector<int> labels;
  std::vector<std::int64_t> ids;
  std::map<int, std::string> class_names;

  Eigen::Index size() const noexcept { return features.rows(); }
  Eigen::Index dim() const noexcept { return features.cols(); }
  /// Throws SchemaError when lengths disagree or a label is below kUnlabeled.
  void validate() const;
};

struct SplitSpec {
  int total_classes = 10;
  /// Classes [0, labeled_classes) keep their labels; the rest become unlabeled.
  int labeled_classes = 5;
  int samples_per_class = 500;
  int dim = 32;
  double cluster_std = 1.0;
  double mean_separation = 8.0;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Ground truth for the unlabeled rows, kept apart from the training-facing dataset.
struct EvaluationSidecar {
  std::vector<std::pair<std::int64_t, int>> rows;  // (id, true_label)

  std::map<std::int64_t, int> by_id() const;
  std::size_t distinct_classes() const;
};

struct GeneratedData {
  Dataset dataset;
  EvaluationSidecar truth;
  Eigen::MatrixXd class_means;
};

/// Seeded isotropic Gaussian mixture. Class means are drawn one at a time and
/// redrawn (up to 1000 attempts each) until they are at least
/// mean_separation from every earlier mean; otherwise SeparationInfeasible.
GeneratedData generate_mixture(const SplitSpec& spec);

/// Header `id,label,f0,...,f{d-1}`. Throws ParseError (with line number) or SchemaError.
Dataset load_csv(const std::filesystem::path& path);
void save_csv(const Dataset& dataset, const std::filesystem::path& path);

/// Header `id,true_label`.
EvaluationSidecar load_sidecar(const std::filesystem::path& path);
void save_sidecar(const EvaluationSidecar& sidecar, const std::filesystem::path& path);

/// Row-per-point CSV without labels: header `id,f0,...,f{d-1}`.
Eigen::MatrixXd load_points_csv(const std::filesystem::path& path);
void save_points_csv(const Eigen::MatrixXd& points, const std::filesystem::path& path);

/// Called with the number of rows read whenever a view hands out features.
using AccessObserver = std::function<void(std::size_t rows)>;

/// Labeled partition: features with their class ids.
class LabeledView {
public:
  LabeledView() = default;
  LabeledView(Eigen::MatrixXd features, std::vector<int> labels, std::vector<std::int64_t> ids);

  Eigen::Index size() const noexcept { return features_.rows(); }
  Eigen::Index dim() const noexcept { return features_.cols(); }
  bool empty() const noexcept { return size() == 0; }
  const std::vector<std::int64_t>& ids() const noexcept { return ids_; }
  /// Sorted distinct labels.
  std::vector<int> classes() const;

  Eigen::MatrixXd rows(std::span<const Eigen::Index> indices) const;
  std::vector<int> labels(std::span<const Eigen::Index> indices) const;
  Eigen::MatrixXd all_features() const;

  void set_access_observer(AccessObserver observer) { observer_ = std::move(observer); }

private:
  Eigen::MatrixXd features_;
  std::vector<int> labels_;
  std::vector<std::int64_t> ids_;
  AccessObserver observer_;
};

/// Unlabeled partition. Carries no labels at all, so nothing downstream of it
/// can read ground truth.
class UnlabeledView {
public:
  UnlabeledView() = default;
  UnlabeledView(Eigen::MatrixXd features, std::vector<std::int64_t> ids);

  Eigen::Index size() const noexcept { return features_.rows(); }
  Eigen::Index dim() const noexcept { return features_.cols(); }
  bool empty() const noexcept { return size() == 0; }
  const std::vector<std::int64_t>& ids() const noexcept { return ids_; }

  Eigen::MatrixXd rows(std::span<const Eigen::Index> indices) const;
  Eigen::MatrixXd all_features() const;

  void set_access_observer(AccessObserver observer) { observer_ = std::move(observer); }

private:
  Eigen::MatrixXd features_;
  std::vector<std::int64_t> ids_;
  AccessObserver observer_;
};

/// Partition by label >= 0 versus kUnlabeled, preserving row order.
std::pair<LabeledView, UnlabeledView> split(const Dataset& dataset);

/// features + N(0, sigma^2 I) drawn from a generator seeded with `seed`.
Eigen::VectorXd augment(const Eigen::VectorXd& features, double sigma, std::uint64_t seed);

/// Row-wise augmentation with a per-feature noise scale, drawing from `rng`.
Eigen::MatrixXd augment_rows(const Eigen::MatrixXd& features, const Eigen::RowVectorXd& sigma,
                             Rng& rng);

}  // namespace spacing
