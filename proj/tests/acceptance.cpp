// Acceptance runner: one PASS/FAIL line per criterion, non-zero exit on any failure.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>

#include "spacing/data.hpp"
#include "spacing/eval.hpp"
#include "spacing/geometry.hpp"
#include "spacing/losses.hpp"
#include "spacing/model.hpp"
#include "spacing/training.hpp"
#include "support.hpp"

using namespace spacing;
using Clock = std::chrono::steady_clock;

namespace {

constexpr double kEquidistanceTolerance = 1e-3;
constexpr double kSolveSeconds = 1.0;
constexpr double kStressSlack = 1e-12;
constexpr double kGradientTolerance = 1e-4;
constexpr double kNmiTolerance = 1e-12;
constexpr double kMinCa = 0.90;
constexpr double kMinNmi = 0.80;
constexpr double kEndToEndSeconds = 120.0;

struct Verdict {
  bool pass;
  std::string detail;
};

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(const char* format, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, format, a, b, c);
  return buf;
}

Verdict equidistance() {
  const std::pair<int, int> shapes[] = {{3, 2}, {4, 3}, {5, 8}, {10, 16}, {20, 64}};
  double worst_dev = 0.0, slowest = 0.0;
  bool ok = true;
  std::mt19937_64 rng(2024);
  for (const auto& [c, z] : shapes) {
    const PointConfiguration protos(oracle::random_matrix(c, z, rng));
    SolverSettings settings;
    settings.seed = static_cast<std::uint64_t>(c * 100 + z);
    const auto start = Clock::now();
    const SolverResult r = get_equidistant_points(protos, 1.5, settings);
    const double elapsed = seconds_since(start);

    double p_dist = 0.0;
    for (int i = 0; i < c; ++i) {
      for (int j = i + 1; j < c; ++j) p_dist = std::max(p_dist, (protos.points().row(i) - protos.points().row(j)).norm());
    }
    const double target = 1.5 * p_dist;
    double dev = 0.0;
    for (int i = 0; i < c; ++i) {
      for (int j = i + 1; j < c; ++j) {
        dev = std::max(dev, std::abs((r.anchors.points().row(i) - r.anchors.points().row(j)).norm() - target) / target);
      }
    }
    worst_dev = std::max(worst_dev, dev);
    slowest = std::max(slowest, elapsed);
    ok = ok && dev < kEquidistanceTolerance && elapsed < kSolveSeconds;
  }
  return {ok, fmt("max relative deviation %.3g (< 1e-3), slowest solve %.3f s (< 1 s)", worst_dev, slowest)};
}

Verdict monotonicity() {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> count(2, 10), width(1, 16);
  double worst_rise = 0.0;
  int steps = 0;
  for (int t = 0; t < 100; ++t) {
    const int c = count(rng), z = width(rng);
    const PointConfiguration protos(oracle::random_matrix(c, z, rng));
    const DissimilarityMatrix delta = build_dissimilarity(protos, 1.5);
    const WeightMatrix unit(Eigen::MatrixXd::Ones(c, c) - Eigen::MatrixXd::Identity(c, c));
    PointConfiguration y(oracle::random_matrix(c, z, rng, delta.target()));
    double previous = oracle::stress(y.points(), delta.target());
    for (int it = 0; it < 200; ++it, ++steps) {
      y = majorization_step(y, delta, unit);
      const double now = oracle::stress(y.points(), delta.target());
      worst_rise = std::max(worst_rise, now - previous);
      previous = now;
    }
    SolverSettings settings;
    settings.seed = static_cast<std::uint64_t>(t);
    settings.record_history = true;
    const auto solved = solve_equidistant(delta, z, settings);
    for (std::size_t k = 1; k < solved.stress_history.size(); ++k, ++steps) {
      worst_rise = std::max(worst_rise, solved.stress_history[k] - solved.stress_history[k - 1]);
    }
  }
  return {worst_rise <= kStressSlack,
          fmt("largest stress increase %.3g over %.0f iterations (<= 1e-12)", worst_rise, steps)};
}

Verdict guttman_step() {
  const PointConfiguration y(Eigen::MatrixXd{{0.0}, {1.0}});
  const DissimilarityMatrix delta = DissimilarityMatrix::uniform(2, 2.0);
  const Eigen::MatrixXd b = b_matrix(y, delta);
  const WeightMatrix unit(Eigen::MatrixXd{{0.0, 1.0}, {1.0, 0.0}});
  const PointConfiguration next = majorization_step(y, delta, unit);
  const bool b_ok = b == Eigen::MatrixXd{{-2.0, 2.0}, {2.0, -2.0}};
  const bool step_ok = next.points()(0, 0) == 1.0 && next.points()(1, 0) == -1.0;
  const double s = oracle::stress(next.points(), 2.0);
  return {b_ok && step_ok && s == 0.0,
          fmt("B = [[%g, 2], [2, -2]], step = {(%g), (%g)}", b(0, 0), next.points()(0, 0), next.points()(1, 0)) +
              fmt(", stress %g", s)};
}

double net_gradient_error(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  FeatureExtractor net = FeatureExtractor::create({4, 6, 5, 3}, seed);
  for (auto& l : net.layers()) l.bias = oracle::random_matrix(1, l.out_dim(), rng, 0.3);
  const Eigen::MatrixXd x = oracle::random_matrix(5, 4, rng);
  const Eigen::MatrixXd u = oracle::random_matrix(5, 3, rng);
  const GradientSet g = backward(net, forward(net, x).cache, u);
  double worst = 0.0;
  for (std::size_t l = 0; l < net.layers().size(); ++l) {
    auto f_w = [&](const Eigen::MatrixXd& w) {
      FeatureExtractor copy = net;
      copy.layers()[l].weight = w;
      return (encode(copy, x).array() * u.array()).sum();
    };
    auto f_b = [&](const Eigen::MatrixXd& b) {
      FeatureExtractor copy = net;
      copy.layers()[l].bias = b;
      return (encode(copy, x).array() * u.array()).sum();
    };
    worst = std::max(worst, oracle::max_relative_error(
                                g.layers[l].weight, oracle::numeric_gradient(f_w, net.layers()[l].weight), 1e-6));
    worst = std::max(worst, oracle::max_relative_error(
                                g.layers[l].bias, oracle::numeric_gradient(f_b, net.layers()[l].bias), 1e-6));
  }
  return worst;
}

double loss_gradient_error(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  double worst = 0.0;
  const Eigen::MatrixXd z = oracle::random_matrix(7, 3, rng);
  const PointConfiguration protos(oracle::random_matrix(3, 3, rng));
  const Assignment a = assign_nearest(z, protos);
  auto mse = [&](const Eigen::MatrixXd& x) { return spacing_mse(x, a, protos).value; };
  worst = std::max(worst, oracle::max_relative_error(spacing_mse(z, a, protos).input_gradient,
                                                     oracle::numeric_gradient(mse, z), 1e-6));

  const Eigen::MatrixXd logits = oracle::random_matrix(7, 4, rng);
  const std::vector<int> labels{0, 3, 1, 2, 2, 0, 1};
  auto ce = [&](const Eigen::MatrixXd& l) { return cross_entropy(softmax_rows(l), labels).value; };
  worst = std::max(worst, oracle::max_relative_error(cross_entropy(softmax_rows(logits), labels).input_gradient,
                                                     oracle::numeric_gradient(ce, logits), 1e-6));

  const Eigen::MatrixXd latents = oracle::random_matrix(6, 4, rng);
  const Eigen::MatrixXd probs = softmax_rows(oracle::random_matrix(6, 3, rng));
  auto pw = [&](const Eigen::MatrixXd& p) { return pairwise_pseudo(latents, p, 0.2).value; };
  worst = std::max(worst, oracle::max_relative_error(pairwise_pseudo(latents, probs, 0.2).input_gradient,
                                                     oracle::numeric_gradient(pw, probs), 1e-6));

  const Eigen::MatrixXd other = softmax_rows(oracle::random_matrix(6, 3, rng));
  auto cons = [&](const Eigen::MatrixXd& p) { return consistency(p, other).value; };
  worst = std::max(worst, oracle::max_relative_error(consistency(probs, other).input_gradient,
                                                     oracle::numeric_gradient(cons, probs), 1e-6));
  return worst;
}

Verdict gradient_fidelity() {
  double nets = 0.0, losses = 0.0;
  for (std::uint64_t s = 0; s < 10; ++s) {
    nets = std::max(nets, net_gradient_error(s));
    losses = std::max(losses, loss_gradient_error(100 + s));
  }
  return {nets < kGradientTolerance && losses < kGradientTolerance,
          fmt("max relative error: networks %.3g, losses %.3g (< 1e-4, 10 instances each)", nets, losses)};
}

Verdict metric_oracles() {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> size(1, 60), clusters(1, 5);
  int ca_mismatches = 0;
  double nmi_gap = 0.0;
  for (int t = 0; t < 200; ++t) {
    const auto n = static_cast<std::size_t>(size(rng));
    std::uniform_int_distribution<int> p(0, clusters(rng) - 1), q(0, clusters(rng) - 1);
    std::vector<int> predicted(n), truth(n);
    for (auto& v : predicted) v = p(rng);
    for (auto& v : truth) v = q(rng);
    if (clustering_accuracy(predicted, truth) != oracle::brute_force_accuracy(predicted, truth)) ++ca_mismatches;
    nmi_gap = std::max(nmi_gap, std::abs(nmi(predicted, truth) - oracle::nmi(predicted, truth)));
  }
  const double worked = clustering_accuracy({0, 0, 1, 1, 1, 0}, {1, 1, 0, 0, 0, 0});
  return {ca_mismatches == 0 && nmi_gap <= kNmiTolerance && worked == 5.0 / 6.0,
          fmt("CA mismatches %.0f/200, NMI gap %.3g (<= 1e-12), worked example CA %.6f", ca_mismatches, nmi_gap,
              worked)};
}

struct DiscoveryRun {
  ClusteringReport report;
  double phase_one_ca = 0.0;
  double seconds = 0.0;
};

GeneratedData balanced_fixture() {
  SplitSpec s;
  s.total_classes = 10;
  s.labeled_classes = 5;
  s.samples_per_class = 500;
  s.dim = 32;
  s.cluster_std = 1.0;
  s.mean_separation = 8.0;
  s.seed = 0;
  return generate_mixture(s);
}

std::vector<int> ordered_truth(const UnlabeledView& unlabeled, const EvaluationSidecar& sidecar) {
  const auto by_id = sidecar.by_id();
  std::vector<int> truth;
  for (auto id : unlabeled.ids()) truth.push_back(by_id.at(id));
  return truth;
}

DiscoveryRun two_stage_run() {
  const auto start = Clock::now();
  const GeneratedData data = balanced_fixture();
  const auto [labeled, unlabeled] = split(data.dataset);
  TrainingConfig config;
  config.seed = 0;
  config.novel_classes = static_cast<int>(data.truth.distinct_classes());
  std::optional<ModelBundle> phase_one;
  const TrainingResult result =
      train_two_stage(labeled, unlabeled, config, [&](const ModelBundle& m) { phase_one = m; });
  const auto truth = ordered_truth(unlabeled, data.truth);
  const int k = config.novel_classes;
  DiscoveryRun run;
  run.report = make_report(kmeans_infer(unlabeled_latents(result.model, unlabeled), k, 0), truth, k, 0);
  run.seconds = seconds_since(start);
  run.phase_one_ca =
      clustering_accuracy(kmeans_infer(unlabeled_latents(*phase_one, unlabeled), k, 0), truth);
  return run;
}

ClusteringReport imbalanced_run() {
  SplitSpec s;
  s.total_classes = 20;
  s.labeled_classes = 4;
  s.samples_per_class = 200;
  s.dim = 32;
  s.mean_separation = 8.0;
  s.seed = 0;
  const GeneratedData data = generate_mixture(s);
  const auto [labeled, unlabeled] = split(data.dataset);
  TrainingConfig config;
  config.regime = Regime::single_stage;
  config.seed = 0;
  config.novel_classes = static_cast<int>(data.truth.distinct_classes());
  const TrainingResult result = train_single_stage(labeled, unlabeled, config);
  const int k = config.novel_classes;
  return make_report(kmeans_infer(unlabeled_latents(result.model, unlabeled), k, 0),
                     ordered_truth(unlabeled, data.truth), k, 0);
}

bool report_valid(const ClusteringReport& r) {
  return std::isfinite(r.ca) && std::isfinite(r.nmi) && r.ca >= 0.0 && r.ca <= 1.0 && r.nmi >= 0.0 &&
         r.nmi <= 1.0 && r.predicted.size() == r.truth.size() && !r.predicted.empty();
}

}  // namespace

int main() {
  int failures = 0;
  auto report = [&](int id, const char* name, const std::function<Verdict()>& check) {
    Verdict v{false, ""};
    try {
      v = check();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    if (!v.pass) ++failures;
    std::printf("%s %d %s: %s\n", v.pass ? "PASS" : "FAIL", id, name, v.detail.c_str());
    std::fflush(stdout);
  };

  report(1, "equidistance", equidistance);
  report(2, "majorization monotonicity", monotonicity);
  report(3, "hand-checked Guttman step", guttman_step);
  report(4, "gradient fidelity", gradient_fidelity);
  report(5, "metric oracles", metric_oracles);

  std::optional<DiscoveryRun> first;
  std::optional<ClusteringReport> imbalanced;
  report(6, "two-stage discovery", [&] {
    first = two_stage_run();
    const auto& r = first->report;
    return Verdict{r.ca >= kMinCa && r.nmi >= kMinNmi && first->seconds < kEndToEndSeconds,
                   fmt("CA %.4f (>= 0.90), NMI %.4f (>= 0.80), ", r.ca, r.nmi) +
                       fmt("%.1f s (< 120 s)", first->seconds)};
  });
  report(7, "spacing beats phase-1 k-means", [&] {
    if (!first) return Verdict{false, "criterion 6 did not produce a run"};
    return Verdict{first->report.ca >= first->phase_one_ca,
                   fmt("CA after spacing %.4f >= phase-1 k-means CA %.4f", first->report.ca, first->phase_one_ca)};
  });
  report(8, "imbalanced single-stage smoke", [&] {
    imbalanced = imbalanced_run();
    return Verdict{report_valid(*imbalanced),
                   fmt("CA %.4f, NMI %.4f, k %.0f", imbalanced->ca, imbalanced->nmi, imbalanced->k)};
  });
  report(9, "determinism", [&] {
    if (!first || !imbalanced) return Verdict{false, "criteria 6 or 8 did not produce a run"};
    const bool same_two_stage = two_stage_run().report.to_json() == first->report.to_json();
    const bool same_single = imbalanced_run().to_json() == imbalanced->to_json();
    return Verdict{same_two_stage && same_single,
                   std::string("rerun metrics JSON identical: two-stage ") + (same_two_stage ? "yes" : "no") +
                       ", single-stage " + (same_single ? "yes" : "no")};
  });

  std::printf("%d of 9 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
