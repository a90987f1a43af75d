#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <vector>

#include "glmb/error.hpp"

namespace glmb {

struct GaussianComponent {
  double weight = 1.0;
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

/// Weighted sum of Gaussians; a track's kinematic density.
struct GaussianMixture {
  std::vector<GaussianComponent> components;

  GaussianMixture() = default;
  explicit GaussianMixture(std::vector<GaussianComponent> comps) : components(std::move(comps)) {}
  static GaussianMixture single(Eigen::VectorXd mean, Eigen::MatrixXd cov) {
    return GaussianMixture({GaussianComponent{1.0, std::move(mean), std::move(cov)}});
  }

  std::size_t size() const noexcept { return components.size(); }
  Eigen::Index dim() const { return components.empty() ? 0 : components.front().mean.size(); }

  double total_weight() const {
    double s = 0.0;
    for (const auto& c : components) s += c.weight;
    return s;
  }

  bool is_normalized(double tol = 1e-9) const { return std::abs(total_weight() - 1.0) <= tol; }

  /// Mixture mean (the expected state).
  Eigen::VectorXd mean() const {
    Eigen::VectorXd m = Eigen::VectorXd::Zero(dim());
    const double w = total_weight();
    for (const auto& c : components) m += c.weight * c.mean;
    return w > 0.0 ? Eigen::VectorXd(m / w) : m;
  }

  void normalize() {
    const double w = total_weight();
    if (!(w > 0.0)) throw DegenerateDensityError("Gaussian mixture has zero total weight");
    for (auto& c : components) c.weight /= w;
  }
};

inline constexpr double kLog2Pi = 1.8378770664093454836;

/// log N(x; mean, cov). Throws NumericalError if cov is not positive definite.
inline double log_gaussian_pdf(const Eigen::VectorXd& x, const Eigen::VectorXd& mean,
                               const Eigen::MatrixXd& cov) {
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success) throw NumericalError("covariance is not positive definite");
  const Eigen::VectorXd d = x - mean;
  const Eigen::VectorXd y = llt.matrixL().solve(d);
  const double log_det = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  return -0.5 * (y.squaredNorm() + log_det + static_cast<double>(x.size()) * kLog2Pi);
}

inline double log_sum_exp(const std::vector<double>& v) {
  if (v.empty()) return -std::numeric_limits<double>::infinity();
  const double mx = *std::max_element(v.begin(), v.end());
  if (!std::isfinite(mx)) return mx;
  double s = 0.0;
  for (double x : v) s += std::exp(x - mx);
  return mx + std::log(s);
}

inline void symmetrize(Eigen::MatrixXd& P) { P = 0.5 * (P + P.transpose()).eval(); }

struct MixtureLimits {
  double weight_floor = 1e-5;
  double merge_distance = 4.0;  // squared Mahalanobis
  std::size_t max_components = 100;
};

/// Drops light components, merges close ones by moment matching, caps the
/// count by weight and renormalizes. If every component is below the floor
/// the heaviest one is kept.
inline GaussianMixture prune_merge_mixture(const GaussianMixture& p, const MixtureLimits& limits = {}) {
  if (p.components.empty()) return p;
  std::vector<GaussianComponent> pool;
  for (const auto& c : p.components) {
    if (c.weight >= limits.weight_floor) pool.push_back(c);
  }
  if (pool.empty()) {
    pool.push_back(*std::max_element(p.components.begin(), p.components.end(),
                                     [](const auto& a, const auto& b) { return a.weight < b.weight; }));
  }

  std::vector<GaussianComponent> merged;
  std::vector<char> taken(pool.size(), 0);
  while (true) {
    std::size_t lead = pool.size();
    for (std::size_t i = 0; i < pool.size(); ++i) {
      if (!taken[i] && (lead == pool.size() || pool[i].weight > pool[lead].weight)) lead = i;
    }
    if (lead == pool.size()) break;
    Eigen::LLT<Eigen::MatrixXd> llt(pool[lead].cov);
    if (llt.info() != Eigen::Success) throw NumericalError("mixture component covariance is not positive definite");
    std::vector<std::size_t> group;
    for (std::size_t i = 0; i < pool.size(); ++i) {
      if (taken[i]) continue;
      const Eigen::VectorXd d = pool[i].mean - pool[lead].mean;
      const double d2 = d.dot(llt.solve(d));
      if (i == lead || d2 <= limits.merge_distance) group.push_back(i);
    }
    GaussianComponent out;
    out.weight = 0.0;
    out.mean = Eigen::VectorXd::Zero(pool[lead].mean.size());
    for (std::size_t i : group) {
      out.weight += pool[i].weight;
      out.mean += pool[i].weight * pool[i].mean;
      taken[i] = 1;
    }
    out.mean /= out.weight;
    out.cov = Eigen::MatrixXd::Zero(out.mean.size(), out.mean.size());
    for (std::size_t i : group) {
      const Eigen::VectorXd d = out.mean - pool[i].mean;
      out.cov += pool[i].weight * (pool[i].cov + d * d.transpose());
    }
    out.cov /= out.weight;
    symmetrize(out.cov);
    merged.push_back(std::move(out));
  }

  std::stable_sort(merged.begin(), merged.end(),
                   [](const auto& a, const auto& b) { return a.weight > b.weight; });
  if (merged.size() > limits.max_components) merged.resize(limits.max_components);
  GaussianMixture result(std::move(merged));
  result.normalize();
  return result;
}

}  // namespace glmb
