#include <doctest.h>

#include <random>

#include "spacing/error.hpp"
#include "spacing/kmeans.hpp"
#include "spacing/prototypes.hpp"
#include "support.hpp"

using namespace spacing;

namespace {

PointConfiguration config2(std::initializer_list<std::pair<double, double>> pts) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(pts.size()), 2);
  Eigen::Index i = 0;
  for (const auto& [x, y] : pts) {
    m(i, 0) = x;
    m(i, 1) = y;
    ++i;
  }
  return PointConfiguration(m);
}

Eigen::MatrixXd mat(std::initializer_list<std::initializer_list<double>> data) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(data.size()),
                    static_cast<Eigen::Index>(data.begin()->size()));
  Eigen::Index i = 0;
  for (const auto& row : data) {
    Eigen::Index j = 0;
    for (double v : row) m(i, j++) = v;
    ++i;
  }
  return m;
}

}  // namespace

TEST_CASE("k-means centroids of two separated pairs") {
  const Eigen::MatrixXd x = mat({{0, 0}, {0.1, 0}, {10, 10}, {10.1, 10}});
  const PointConfiguration p = init_prototypes(x, 2, 0);
  Eigen::MatrixXd c = p.points();
  if (c(0, 0) > c(1, 0)) c.row(0).swap(c.row(1));
  CHECK(c(0, 0) == doctest::Approx(0.05));
  CHECK(c(0, 1) == doctest::Approx(0.0));
  CHECK(c(1, 0) == doctest::Approx(10.05));
  CHECK(c(1, 1) == doctest::Approx(10.0));
}

TEST_CASE("k-means with one point per cluster returns the inputs") {
  const Eigen::MatrixXd x = mat({{1, 2}, {5, -1}, {-3, 4}});
  const PointConfiguration p = init_prototypes(x, 3, 17);
  for (Eigen::Index i = 0; i < 3; ++i) {
    bool found = false;
    for (Eigen::Index j = 0; j < 3; ++j) found = found || p.points().row(j) == x.row(i);
    CHECK(found);
  }
  const auto r = kmeans(x, 3, {});
  CHECK(r.inertia == 0.0);
}

TEST_CASE("too few samples for the requested prototype count") {
  CHECK_THROWS_AS(init_prototypes(mat({{0, 0}, {1, 1}}), 3, 0), Error);
  try {
    init_prototypes(mat({{0, 0}, {1, 1}}), 3, 0);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::TooFewSamples);
  }
}

TEST_CASE("k-means is deterministic and its inertia never rises") {
  std::mt19937_64 rng(1);
  const Eigen::MatrixXd x = oracle::random_matrix(200, 3, rng);
  KMeansOptions o;
  o.seed = 9;
  o.record_history = true;
  const auto a = kmeans(x, 6, o);
  const auto b = kmeans(x, 6, o);
  CHECK(a.labels == b.labels);
  CHECK(a.centroids == b.centroids);
  REQUIRE(a.inertia_history.size() >= 2);
  for (std::size_t t = 1; t < a.inertia_history.size(); ++t) {
    CHECK(a.inertia_history[t] <= a.inertia_history[t - 1] * (1 + 1e-12));
  }
}

TEST_CASE("restarts never end with a worse inertia than the first run") {
  std::mt19937_64 rng(4);
  const Eigen::MatrixXd x = oracle::random_matrix(150, 2, rng);
  KMeansOptions one;
  one.seed = 3;
  KMeansOptions many = one;
  many.restarts = 8;
  CHECK(kmeans(x, 5, many).inertia <= kmeans(x, 5, one).inertia);
}

TEST_CASE("nearest prototype with lowest-index tie break") {
  const auto p = config2({{0, 0}, {10, 10}});
  CHECK(assign_nearest(mat({{1, 1}}), p).indices == std::vector<int>{0});
  CHECK(assign_nearest(mat({{10, 10}}), p).indices == std::vector<int>{1});
  CHECK(assign_nearest(mat({{5, 5}}), p).indices == std::vector<int>{0});
  CHECK_THROWS_AS(assign_nearest(mat({{1, 2, 3}}), p), Error);
}

TEST_CASE("assignment is invariant under a common translation") {
  std::mt19937_64 rng(8);
  const Eigen::MatrixXd z = oracle::random_matrix(60, 4, rng);
  const Eigen::MatrixXd p = oracle::random_matrix(5, 4, rng);
  const Eigen::RowVectorXd shift = oracle::random_matrix(1, 4, rng, 10.0);
  const auto a = assign_nearest(z, PointConfiguration(p));
  const auto b = assign_nearest(z.rowwise() + shift, PointConfiguration(p.rowwise() + shift));
  CHECK(a == b);
}

TEST_CASE("transport: first and second assignment by hand") {
  PrototypeState s(config2({{5, 5}, {-5, -5}}), config2({{0, 3}, {0, -3}}));
  s = update_prototypes(std::move(s), mat({{1, 0}}), Assignment{{0}});
  CHECK(s.prototypes.points()(0, 0) == 1.0);
  CHECK(s.prototypes.points()(0, 1) == 3.0);
  CHECK(s.frequency[0] == 1);
  s = update_prototypes(std::move(s), mat({{3, 0}}), Assignment{{0}});
  CHECK(s.prototypes.points()(0, 0) == doctest::Approx(2.0));
  CHECK(s.prototypes.points()(0, 1) == doctest::Approx(3.0));
  CHECK(s.frequency[0] == 2);
  CHECK(s.prototypes.points()(1, 0) == -5.0);
}

TEST_CASE("convex transport blends latent and anchor") {
  PrototypeState s(config2({{5, 5}, {-5, -5}}), config2({{0, 4}, {0, -4}}));
  TransportOptions o{TransportMode::convex, 0.25};
  s = update_prototypes(std::move(s), mat({{4, 0}}), Assignment{{0}}, o);
  CHECK(s.prototypes.points()(0, 0) == doctest::Approx(1.0));
  CHECK(s.prototypes.points()(0, 1) == doctest::Approx(3.0));
}

TEST_CASE("empty batch leaves the state unchanged") {
  PrototypeState s(config2({{1, 1}, {2, 2}}), config2({{0, 1}, {1, 0}}));
  const auto t = update_prototypes(s, Eigen::MatrixXd(0, 2), Assignment{});
  CHECK(t.prototypes.points() == s.prototypes.points());
  CHECK(t.frequency == s.frequency);
}

TEST_CASE("frequencies grow by the batch size and never shrink") {
  std::mt19937_64 rng(12);
  PrototypeState s(PointConfiguration(oracle::random_matrix(4, 3, rng)),
                   PointConfiguration(oracle::random_matrix(4, 3, rng)));
  std::uint64_t total = 0;
  for (int b = 0; b < 10; ++b) {
    const Eigen::MatrixXd z = oracle::random_matrix(1 + b * 3, 3, rng);
    const auto a = assign_nearest(z, s.prototypes);
    const auto before = s.frequency;
    s = update_prototypes(std::move(s), z, a);
    std::uint64_t sum = 0;
    for (std::size_t j = 0; j < 4; ++j) {
      CHECK(s.frequency[j] >= before[j]);
      sum += s.frequency[j];
    }
    total += static_cast<std::uint64_t>(z.rows());
    CHECK(sum == total);
  }
}

TEST_CASE("single-class transport is the running mean of latent plus anchor") {
  std::mt19937_64 rng(21);
  const Eigen::MatrixXd anchor = oracle::random_matrix(2, 5, rng);
  PrototypeState s(PointConfiguration(oracle::random_matrix(2, 5, rng)), PointConfiguration(anchor));
  const Eigen::MatrixXd z = oracle::random_matrix(300, 5, rng);
  for (Eigen::Index i = 0; i < z.rows(); i += 7) {
    const Eigen::Index rows = std::min<Eigen::Index>(7, z.rows() - i);
    s = update_prototypes(std::move(s), z.middleRows(i, rows),
                          Assignment{std::vector<int>(static_cast<std::size_t>(rows), 0)});
  }
  const Eigen::RowVectorXd expected = z.colwise().mean() + anchor.row(0);
  CHECK((s.prototypes.points().row(0) - expected).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("prototype state requires matching shapes") {
  CHECK_THROWS_AS(PrototypeState(config2({{0, 0}, {1, 1}}), PointConfiguration(Eigen::MatrixXd::Ones(3, 2))),
                  Error);
  PrototypeState s(config2({{0, 0}, {1, 1}}), config2({{0, 1}, {1, 0}}));
  CHECK_THROWS_AS(update_prototypes(s, mat({{1, 1}}), Assignment{{2}}), Error);
  CHECK_THROWS_AS(update_prototypes(s, mat({{1, 1}, {2, 2}}), Assignment{{0}}), Error);
}

TEST_CASE("anchor alignment is an isometry that moves anchors onto prototypes") {
  std::mt19937_64 rng(31);
  for (int t = 0; t < 10; ++t) {
    const Eigen::Index c = 3 + t % 5, z = c + t % 3;
    const PointConfiguration protos(oracle::random_matrix(c, z, rng, 4.0));
    const PointConfiguration anchors(oracle::random_matrix(c, z, rng, 4.0));
    const auto centered = [](const Eigen::MatrixXd& m) {
      return Eigen::MatrixXd(m.rowwise() - m.colwise().mean());
    };
    const double before = (centered(anchors.points()) - centered(protos.points())).norm();
    for (auto mode : {AnchorAlignment::rotate, AnchorAlignment::rotate_translate}) {
      const auto aligned = align_anchors(anchors, protos, mode);
      for (Eigen::Index i = 0; i < c; ++i) {
        for (Eigen::Index j = i + 1; j < c; ++j) {
          CHECK(aligned.distance(i, j) == doctest::Approx(anchors.distance(i, j)).epsilon(1e-12));
        }
      }
      CHECK((centered(aligned.points()) - centered(protos.points())).norm() <= before + 1e-9);
    }
    const Eigen::RowVectorXd proto_mean = protos.points().colwise().mean();
    const auto rotated = align_anchors(anchors, protos, AnchorAlignment::rotate);
    const auto moved = align_anchors(anchors, protos, AnchorAlignment::rotate_translate);
    CHECK(rotated.points().colwise().mean().cwiseAbs().maxCoeff() < 1e-12);
    CHECK((moved.points().colwise().mean() - proto_mean).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(align_anchors(anchors, protos, AnchorAlignment::index).points() == anchors.points());
  }
}

TEST_CASE("aligning a permuted simplex recovers the prototype order") {
  const Eigen::Index c = 4;
  Eigen::MatrixXd simplex = Eigen::MatrixXd::Identity(c, c);
  simplex.rowwise() -= simplex.colwise().mean();
  Eigen::MatrixXd permuted(c, c);
  permuted << simplex.row(2), simplex.row(0), simplex.row(3), simplex.row(1);
  const auto aligned =
      align_anchors(PointConfiguration(permuted), PointConfiguration(simplex), AnchorAlignment::rotate);
  CHECK((aligned.points() - simplex).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("transport and alignment names round-trip") {
  for (auto m : {TransportMode::verbatim, TransportMode::convex}) CHECK(parse_transport_mode(to_string(m)) == m);
  for (auto a : {AnchorAlignment::index, AnchorAlignment::rotate, AnchorAlignment::rotate_translate}) {
    CHECK(parse_anchor_alignment(to_string(a)) == a);
  }
  CHECK_THROWS_AS(parse_transport_mode("sideways"), Error);
  CHECK_THROWS_AS(parse_anchor_alignment("sideways"), Error);
}
