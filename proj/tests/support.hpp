#pragma once

// Independent reference implementations used only by the tests. None of these
// call into the library code they are used to check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

/// Central differences of a scalar function over every entry of x.
inline Eigen::MatrixXd numeric_gradient(const std::function<double(const Eigen::MatrixXd&)>& f,
                                        const Eigen::MatrixXd& x, double h = 1e-5) {
  Eigen::MatrixXd grad(x.rows(), x.cols());
  Eigen::MatrixXd probe = x;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      const double saved = probe(i, j);
      probe(i, j) = saved + h;
      const double up = f(probe);
      probe(i, j) = saved - h;
      const double down = f(probe);
      probe(i, j) = saved;
      grad(i, j) = (up - down) / (2.0 * h);
    }
  }
  return grad;
}

/// max |a - b| / max(|a|, |b|, floor) over all entries. The floor keeps
/// entries that are zero up to rounding from dominating the ratio.
inline double max_relative_error(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                                 double floor) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      const double scale = std::max({std::abs(a(i, j)), std::abs(b(i, j)), floor});
      worst = std::max(worst, std::abs(a(i, j) - b(i, j)) / scale);
    }
  }
  return worst;
}

/// Stress by a direct double loop over unordered pairs with unit weights.
inline double stress(const Eigen::MatrixXd& points, double target) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < points.rows(); ++j) {
      const double d = std::sqrt((points.row(i) - points.row(j)).squaredNorm());
      total += (d - target) * (d - target);
    }
  }
  return total;
}

inline std::vector<int> distinct(const std::vector<int>& v) {
  std::set<int> s(v.begin(), v.end());
  return {s.begin(), s.end()};
}

/// Best matched count over every injective map from predicted clusters to
/// true classes, by enumerating permutations of a padded label set.
inline double brute_force_accuracy(const std::vector<int>& predicted, const std::vector<int>& truth) {
  const std::vector<int> clusters = distinct(predicted);
  const std::vector<int> classes = distinct(truth);
  const std::size_t slots = std::max(clusters.size(), classes.size());
  // Targets: true classes, then placeholder "no class" entries (-1 never matches).
  std::vector<int> targets = classes;
  while (targets.size() < slots) targets.push_back(-1 - static_cast<int>(targets.size()));
  std::sort(targets.begin(), targets.end());
  std::size_t best = 0;
  do {
    std::map<int, int> mapping;
    for (std::size_t c = 0; c < clusters.size(); ++c) mapping[clusters[c]] = targets[c];
    std::size_t hits = 0;
    for (std::size_t i = 0; i < predicted.size(); ++i) {
      if (mapping[predicted[i]] == truth[i]) ++hits;
    }
    best = std::max(best, hits);
  } while (std::next_permutation(targets.begin(), targets.end()));
  return static_cast<double>(best) / static_cast<double>(predicted.size());
}

/// NMI straight from the definitions: empirical joint and marginal
/// distributions, natural logs, geometric-mean normalization.
inline double nmi(const std::vector<int>& u, const std::vector<int>& v) {
  const double n = static_cast<double>(u.size());
  std::map<int, int> cu, cv;
  std::map<std::pair<int, int>, int> joint;
  for (std::size_t i = 0; i < u.size(); ++i) {
    ++cu[u[i]];
    ++cv[v[i]];
    ++joint[{u[i], v[i]}];
  }
  // Identical partitions (up to relabeling) score 1, including the single-cluster case.
  const bool identical = cu.size() == cv.size() && joint.size() == cu.size();
  if (identical) return 1.0;
  if (cu.size() == 1 || cv.size() == 1) return 0.0;
  double hu = 0.0, hv = 0.0, mi = 0.0;
  for (const auto& [k, c] : cu) hu -= (c / n) * std::log(c / n);
  for (const auto& [k, c] : cv) hv -= (c / n) * std::log(c / n);
  for (const auto& [key, c] : joint) {
    const double p = c / n;
    mi += p * std::log(p / ((cu[key.first] / n) * (cv[key.second] / n)));
  }
  return mi / std::sqrt(hu * hv);
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("spacing-ncd-test-" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline Eigen::MatrixXd random_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng,
                                     double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = normal(rng);
  }
  return m;
}

}  // namespace oracle
