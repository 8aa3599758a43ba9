#include "spacing/prototypes.hpp"

#include <string>

#include "spacing/error.hpp"
#include "spacing/kmeans.hpp"

namespace spacing {

std::string_view to_string(TransportMode mode) noexcept {
  return mode == TransportMode::verbatim ? "verbatim" : "convex";
}

TransportMode parse_transport_mode(std::string_view name) {
  if (name == "verbatim") return TransportMode::verbatim;
  if (name == "convex") return TransportMode::convex;
  throw Error(ErrorCode::InvalidArgument, "unknown transport mode '" + std::string(name) + "'");
}

std::string_view to_string(AnchorAlignment alignment) noexcept {
  switch (alignment) {
    case AnchorAlignment::index: return "index";
    case AnchorAlignment::rotate: return "rotate";
    case AnchorAlignment::rotate_translate: return "rotate_translate";
  }
  return "index";
}

AnchorAlignment parse_anchor_alignment(std::string_view name) {
  if (name == "index") return AnchorAlignment::index;
  if (name == "rotate") return AnchorAlignment::rotate;
  if (name == "rotate_translate") return AnchorAlignment::rotate_translate;
  throw Error(ErrorCode::InvalidArgument, "unknown anchor alignment '" + std::string(name) + "'");
}

PointConfiguration align_anchors(const PointConfiguration& anchors,
                                 const PointConfiguration& prototypes, AnchorAlignment alignment) {
  if (anchors.count() != prototypes.count() || anchors.dim() != prototypes.dim()) {
    throw Error(ErrorCode::DimensionMismatch, "anchors and prototypes must share shape");
  }
  if (alignment == AnchorAlignment::index) return anchors;

  const Eigen::RowVectorXd anchor_mean = anchors.points().colwise().mean();
  const Eigen::RowVectorXd proto_mean = prototypes.points().colwise().mean();
  const Eigen::MatrixXd a = anchors.points().rowwise() - anchor_mean;
  const Eigen::MatrixXd p = prototypes.points().rowwise() - proto_mean;
  // Orthogonal Procrustes: Q = U V^T from the SVD of a^T p minimizes ||a Q - p||_F.
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(a.transpose() * p,
                                              Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::MatrixXd rotated = a * (svd.matrixU() * svd.matrixV().transpose());
  if (alignment == AnchorAlignment::rotate_translate) rotated.rowwise() += proto_mean;
  return PointConfiguration(std::move(rotated));
}

PrototypeState::PrototypeState(PointConfiguration prototypes_in, PointConfiguration anchors_in)
    : prototypes(std::move(prototypes_in)),
      anchors(std::move(anchors_in)),
      frequency(static_cast<std::size_t>(prototypes.count()), 0) {
  if (prototypes.count() != anchors.count() || prototypes.dim() != anchors.dim()) {
    throw Error(ErrorCode::DimensionMismatch, "prototypes and anchors must share shape");
  }
}

PointConfiguration init_prototypes(const Eigen::MatrixXd& latents, int c, std::uint64_t seed,
                                   int restarts) {
  if (c < 2) throw Error(ErrorCode::InvalidArgument, "need at least 2 prototypes");
  KMeansOptions options;
  options.seed = seed;
  options.restarts = restarts;
  return PointConfiguration(kmeans(latents, c, options).centroids);
}

Assignment assign_nearest(const Eigen::MatrixXd& latents, const PointConfiguration& prototypes) {
  return Assignment{nearest_rows(latents, prototypes.points())};
}

PrototypeState update_prototypes(PrototypeState state, const Eigen::MatrixXd& latents,
                                 const Assignment& assignment, const TransportOptions& options) {
  if (static_cast<Eigen::Index>(assignment.size()) != latents.rows()) {
    throw Error(ErrorCode::DimensionMismatch, "assignment length differs from latent rows");
  }
  if (latents.rows() > 0 && latents.cols() != state.prototypes.dim()) {
    throw Error(ErrorCode::DimensionMismatch, "latent width differs from prototype dimension");
  }
  if (latents.rows() == 0) return state;

  Eigen::MatrixXd p = state.prototypes.points();
  const Eigen::MatrixXd& anchors = state.anchors.points();
  for (Eigen::Index i = 0; i < latents.rows(); ++i) {
    const int j = assignment.indices[static_cast<std::size_t>(i)];
    if (j < 0 || j >= p.rows()) {
      throw Error(ErrorCode::DimensionMismatch, "assignment index out of range");
    }
    auto& count = state.frequency[static_cast<std::size_t>(j)];
    count += 1;
    const double eta = 1.0 / static_cast<double>(count);
    Eigen::RowVectorXd target =
        options.mode == TransportMode::verbatim
            ? Eigen::RowVectorXd(latents.row(i) + anchors.row(j))
            : Eigen::RowVectorXd(options.lambda * latents.row(i) +
                                 (1.0 - options.lambda) * anchors.row(j));
    p.row(j) = (1.0 - eta) * p.row(j) + eta * target;
  }
  state.prototypes = PointConfiguration(std::move(p));
  return state;
}

}  // namespace spacing
