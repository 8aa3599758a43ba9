#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "spacing/geometry.hpp"

namespace spacing {

/// Nearest-prototype index per latent row.
struct Assignment {
  std::vector<int> indices;

  std::size_t size() const noexcept { return indices.size(); }
  bool operator==(const Assignment&) const = default;
};

/// How a prototype is moved by one assigned latent z with anchor a.
///  - verbatim: p <- (1 - eta) p + eta (z + a)
///  - convex:   p <- (1 - eta) p + eta (lambda z + (1 - lambda) a)
enum class TransportMode { verbatim, convex };

std::string_view to_string(TransportMode mode) noexcept;
/// Throws InvalidArgument for unknown names.
TransportMode parse_transport_mode(std::string_view name);

struct TransportOptions {
  TransportMode mode = TransportMode::verbatim;
  double lambda = 0.5;
};

/// Where the solved anchors sit relative to the prototypes they serve.
///  - index:     solver output as is; anchor j pairs with prototype j
///  - rotate:    anchors rotated (orthogonal Procrustes) onto the centered prototypes
///  - rotate_translate: rotated, then shifted to the prototype centroid
enum class AnchorAlignment { index, rotate, rotate_translate };

std::string_view to_string(AnchorAlignment alignment) noexcept;
/// Throws InvalidArgument for unknown names.
AnchorAlignment parse_anchor_alignment(std::string_view name);

/// Isometric placement of `anchors` per `alignment`. Pairwise anchor distances
/// are preserved. Throws DimensionMismatch unless both share (c, z).
PointConfiguration align_anchors(const PointConfiguration& anchors,
                                 const PointConfiguration& prototypes, AnchorAlignment alignment);

struct PrototypeState {
  PointConfiguration prototypes;
  PointConfiguration anchors;
  /// Number of latents assigned to each prototype so far.
  std::vector<std::uint64_t> frequency;

  /// Zero frequencies; throws DimensionMismatch unless both configurations share (c, z).
  PrototypeState(PointConfiguration prototypes, PointConfiguration anchors);
};

/// c centroids of seeded k-means++ / Lloyd (300 iterations max, relative
/// inertia tolerance 1e-6), keeping the lowest-inertia of `restarts` runs.
/// Throws TooFewSamples when n < c.
PointConfiguration init_prototypes(const Eigen::MatrixXd& latents, int c, std::uint64_t seed,
                                   int restarts = 1);

Assignment assign_nearest(const Eigen::MatrixXd& latents, const PointConfiguration& prototypes);

/// Sequential transport in row order. For each row i with assigned class j:
/// v[j] += 1, eta = 1 / v[j], then p_j moves per `options`.
PrototypeState update_prototypes(PrototypeState state, const Eigen::MatrixXd& latents,
                                 const Assignment& assignment,
                                 const TransportOptions& options = {});

}  // namespace spacing
