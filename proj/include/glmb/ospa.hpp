#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <vector>

#include "glmb/assignment.hpp"
#include "glmb/error.hpp"

namespace glmb {

struct OspaResult {
  double total = 0.0;
  double localization = 0.0;
  double cardinality = 0.0;
};

/// OSPA distance of order p with cutoff c between two finite point sets,
/// compared on the first `position_dims` coordinates. With m <= n points,
///
///   total^p        = (min_pi sum_i d_c(x_i, y_pi(i))^p + c^p (n - m)) / n
///   localization^p = (min_pi sum_i d_c(x_i, y_pi(i))^p) / n
///   cardinality^p  = c^p (n - m) / n
///
/// where d_c = min(c, ||x - y||). For p = 1 the components add up to the total.
/// Two empty sets are at distance 0.
inline OspaResult ospa(const std::vector<Eigen::VectorXd>& X, const std::vector<Eigen::VectorXd>& Y, double c,
                       double p, Eigen::Index position_dims = 2) {
  if (!(c > 0.0)) throw InputError("ospa: cutoff c must be positive");
  if (!(p >= 1.0)) throw InputError("ospa: order p must be at least 1");
  const bool x_small = X.size() <= Y.size();
  const auto& A = x_small ? X : Y;
  const auto& B = x_small ? Y : X;
  const std::size_t m = A.size();
  const std::size_t n = B.size();
  if (n == 0) return {};

  const double cp = std::pow(c, p);
  auto dist_p = [&](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    const Eigen::Index d = std::min({position_dims, a.size(), b.size()});
    return std::pow(std::min(c, (a.head(d) - b.head(d)).norm()), p);
  };
  // Leaving a row unassigned costs c^p, the same as a cut-off match, so the
  // assignment runs on d_c^p - c^p <= 0 and a miss reads as distance c.
  CostMatrix C(m, n);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) C(i, j) = dist_p(A[i], B[j]) - cp;
  }
  const auto match = solve_optimal_assignment(C).map;
  double loc = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    loc += match[i] == 0 ? cp : dist_p(A[i], B[static_cast<std::size_t>(match[i] - 1)]);
  }
  const double nn = static_cast<double>(n);
  const double card = cp * static_cast<double>(n - m);
  return {std::pow((loc + card) / nn, 1.0 / p), std::pow(loc / nn, 1.0 / p), std::pow(card / nn, 1.0 / p)};
}

}  // namespace glmb
