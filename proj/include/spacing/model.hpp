#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace spacing {

/// y = x W + b for row-major batches: weight is (in x out), bias is (1 x out).
struct AffineLayer {
  Eigen::MatrixXd weight;
  Eigen::RowVectorXd bias;

  Eigen::Index in_dim() const noexcept { return weight.rows(); }
  Eigen::Index out_dim() const noexcept { return weight.cols(); }
  Eigen::MatrixXd apply(const Eigen::MatrixXd& x) const;

  /// Uniform in [-a, a] with a = sqrt(6 / (fan_in + fan_out)); zero bias.
  static AffineLayer glorot(Eigen::Index in, Eigen::Index out, std::uint64_t seed);
};

struct AffineGradient {
  Eigen::MatrixXd weight;
  Eigen::RowVectorXd bias;
};

/// One gradient per parameter tensor, mirroring the owning network's shapes.
struct GradientSet {
  std::vector<AffineGradient> layers;

  bool all_finite() const;
  GradientSet& operator+=(const GradientSet& other);
};

/// Multilayer perceptron with tanh between layers and a linear last layer.
class FeatureExtractor {
public:
  /// widths = {d, hidden..., z}; needs at least two entries.
  static FeatureExtractor create(const std::vector<Eigen::Index>& widths, std::uint64_t seed);

  /// Throws InvalidArgument on empty or shape-inconsistent layer lists.
  explicit FeatureExtractor(std::vector<AffineLayer> layers);

  const std::vector<AffineLayer>& layers() const noexcept { return layers_; }
  std::vector<AffineLayer>& layers() noexcept { return layers_; }
  Eigen::Index input_dim() const noexcept { return layers_.front().in_dim(); }
  Eigen::Index latent_dim() const noexcept { return layers_.back().out_dim(); }
  bool all_finite() const;

  bool operator==(const FeatureExtractor& other) const;

private:
  std::vector<AffineLayer> layers_;
};

/// Layer inputs recorded by forward; inputs[l] feeds layer l.
struct ForwardCache {
  std::vector<Eigen::MatrixXd> inputs;
};

struct ForwardResult {
  Eigen::MatrixXd latents;
  ForwardCache cache;
};

ForwardResult forward(const FeatureExtractor& extractor, const Eigen::MatrixXd& inputs);

/// forward() without keeping the cache.
Eigen::MatrixXd encode(const FeatureExtractor& extractor, const Eigen::MatrixXd& inputs);

/// Gradients of sum_i <upstream_i, z_i> with respect to every parameter.
/// Throws StaleCache when the cache does not match the extractor or upstream.
GradientSet backward(const FeatureExtractor& extractor, const ForwardCache& cache,
                     const Eigen::MatrixXd& upstream);

/// theta <- theta - learning_rate * grad. Throws InvalidArgument unless learning_rate > 0.
void sgd_step(FeatureExtractor& extractor, const GradientSet& grads, double learning_rate);

/// Linear map followed by a row-wise softmax.
class ClassifierHead {
public:
  static ClassifierHead create(Eigen::Index latent_dim, Eigen::Index classes, std::uint64_t seed);
  explicit ClassifierHead(AffineLayer layer);

  const AffineLayer& layer() const noexcept { return layer_; }
  AffineLayer& layer() noexcept { return layer_; }
  Eigen::Index classes() const noexcept { return layer_.out_dim(); }
  Eigen::Index latent_dim() const noexcept { return layer_.in_dim(); }

  bool operator==(const ClassifierHead& other) const;

private:
  AffineLayer layer_;
};

struct HeadOutput {
  Eigen::MatrixXd logits;
  Eigen::MatrixXd probabilities;
};

HeadOutput head_forward(const ClassifierHead& head, const Eigen::MatrixXd& latents);

struct HeadGradient {
  AffineGradient parameters;
  Eigen::MatrixXd latents;
};

/// Back-propagates a gradient on the logits into the head and its input latents.
HeadGradient head_backward(const ClassifierHead& head, const Eigen::MatrixXd& latents,
                           const Eigen::MatrixXd& logit_gradient);

void sgd_step(ClassifierHead& head, const AffineGradient& grad, double learning_rate);

/// Numerically stable row-wise softmax.
Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& logits);

/// Maps a gradient on softmax outputs to a gradient on the logits.
Eigen::MatrixXd softmax_backward(const Eigen::MatrixXd& probabilities,
                                 const Eigen::MatrixXd& probability_gradient);

/// Backbone plus the labeled and unlabeled heads.
struct ModelBundle {
  FeatureExtractor backbone;
  std::optional<ClassifierHead> labeled_head;
  std::optional<ClassifierHead> unlabeled_head;

  bool operator==(const ModelBundle&) const = default;
};

/// JSON listing of named tensors ("backbone.0.weight", "labeled_head.bias", ...)
/// with shapes and row-major data.
std::string checkpoint_to_json(const ModelBundle& model);
ModelBundle checkpoint_from_json(const std::string& text);

void save_checkpoint(const ModelBundle& model, const std::filesystem::path& path);
ModelBundle load_checkpoint(const std::filesystem::path& path);

}  // namespace spacing
