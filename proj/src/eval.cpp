#include "spacing/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <string>

#include <json.hpp>

#include "spacing/error.hpp"

namespace spacing {

namespace {

void require_lengths(const std::vector<int>& predicted, const std::vector<int>& truth) {
  if (predicted.size() != truth.size()) {
    throw Error(ErrorCode::LengthMismatch, std::to_string(predicted.size()) + " predictions vs " +
                                               std::to_string(truth.size()) + " labels");
  }
  if (predicted.empty()) throw Error(ErrorCode::LengthMismatch, "no samples to evaluate");
}

std::vector<int> densify(const std::vector<int>& ids, int& count) {
  std::map<int, int> index;
  for (int id : ids) index.emplace(id, 0);
  count = 0;
  for (auto& [id, dense] : index) dense = count++;
  std::vector<int> out;
  out.reserve(ids.size());
  for (int id : ids) out.push_back(index.at(id));
  return out;
}

double entropy(const Eigen::VectorXd& counts, double n) {
  double h = 0.0;
  for (Eigen::Index i = 0; i < counts.size(); ++i) {
    if (counts(i) > 0.0) {
      const double p = counts(i) / n;
      h -= p * std::log(p);
    }
  }
  return h;
}

}  // namespace

std::vector<int> solve_assignment(const Eigen::MatrixXd& cost) {
  if (cost.rows() != cost.cols()) {
    throw Error(ErrorCode::DimensionMismatch, "assignment cost matrix must be square");
  }
  const int n = static_cast<int>(cost.rows());
  if (n == 0) return {};
  const double inf = std::numeric_limits<double>::infinity();
  // Potentials u (rows) and v (columns), 1-based with a virtual column 0.
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> row_of(n + 1, 0), way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    row_of[0] = i;
    int j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = row_of[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[row_of[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (row_of[j0] != 0);
    do {
      const int j1 = way[j0];
      row_of[j0] = row_of[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> match(n, -1);
  for (int j = 1; j <= n; ++j) match[row_of[j] - 1] = j - 1;
  return match;
}

KMeansResult kmeans_infer_detailed(const Eigen::MatrixXd& latents, int k,
                                   const KMeansOptions& options) {
  return kmeans(latents, k, options);
}

std::vector<int> kmeans_infer(const Eigen::MatrixXd& latents, int k, std::uint64_t seed,
                              int restarts) {
  KMeansOptions options;
  options.seed = seed;
  options.restarts = restarts;
  return kmeans(latents, k, options).labels;
}

Contingency contingency(const std::vector<int>& predicted, const std::vector<int>& truth) {
  require_lengths(predicted, truth);
  int kp = 0, kt = 0;
  const auto p = densify(predicted, kp);
  const auto t = densify(truth, kt);
  Contingency c{Eigen::MatrixXd::Zero(kp, kt), predicted.size()};
  for (std::size_t i = 0; i < p.size(); ++i) c.counts(p[i], t[i]) += 1.0;
  return c;
}

double clustering_accuracy(const std::vector<int>& predicted, const std::vector<int>& truth) {
  const Contingency c = contingency(predicted, truth);
  const Eigen::Index size = std::max(c.counts.rows(), c.counts.cols());
  Eigen::MatrixXd padded = Eigen::MatrixXd::Zero(size, size);
  padded.topLeftCorner(c.counts.rows(), c.counts.cols()) = c.counts;
  const double top = padded.maxCoeff();
  const auto match = solve_assignment((top - padded.array()).matrix());
  double matched = 0.0;
  for (Eigen::Index r = 0; r < size; ++r) matched += padded(r, match[static_cast<std::size_t>(r)]);
  return matched / static_cast<double>(c.n);
}

double nmi(const std::vector<int>& predicted, const std::vector<int>& truth) {
  const Contingency c = contingency(predicted, truth);
  const double n = static_cast<double>(c.n);
  const Eigen::VectorXd rows = c.counts.rowwise().sum();
  const Eigen::VectorXd cols = c.counts.colwise().sum().transpose();
  const double hu = entropy(rows, n);
  const double hv = entropy(cols, n);

  // Identical partitions (up to relabeling) have a permutation contingency table.
  const bool identical = c.counts.rows() == c.counts.cols() &&
                         (c.counts.array() > 0.0).count() == c.counts.rows();
  if (identical) return 1.0;
  if (hu == 0.0 || hv == 0.0) return 0.0;

  double mi = 0.0;
  for (Eigen::Index i = 0; i < c.counts.rows(); ++i) {
    for (Eigen::Index j = 0; j < c.counts.cols(); ++j) {
      const double nij = c.counts(i, j);
      if (nij > 0.0) mi += (nij / n) * std::log(n * nij / (rows(i) * cols(j)));
    }
  }
  return std::clamp(mi / std::sqrt(hu * hv), 0.0, 1.0);
}

std::string ClusteringReport::to_json() const {
  nlohmann::ordered_json doc;
  doc["ca"] = ca;
  doc["nmi"] = nmi;
  doc["k"] = k;
  doc["seed"] = seed;
  doc["n"] = predicted.size();
  return doc.dump();
}

ClusteringReport make_report(std::vector<int> predicted, std::vector<int> truth, int k,
                             std::uint64_t seed) {
  ClusteringReport report;
  report.ca = clustering_accuracy(predicted, truth);
  report.nmi = nmi(predicted, truth);
  report.predicted = std::move(predicted);
  report.truth = std::move(truth);
  report.k = k;
  report.seed = seed;
  return report;
}

}  // namespace spacing
