#pragma once

// Random small problem instances and comparisons against the brute-force
// references. Used by the test suites and by `glmb oracle`.

#include <Eigen/Dense>
#include <algorithm>
#include <boost/random/uniform_int_distribution.hpp>
#include <boost/random/uniform_real_distribution.hpp>
#include <cmath>
#include <map>
#include <random>
#include <vector>

#include "glmb/filter.hpp"
#include "glmb/testing/brute_force.hpp"

namespace glmb::testing {

using Rng = std::mt19937_64;

inline double uniform(Rng& rng, double lo, double hi) { return boost::random::uniform_real_distribution<double>(lo, hi)(rng); }

inline std::size_t uniform_index(Rng& rng, std::size_t lo, std::size_t hi) {
  return boost::random::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

inline CostMatrix random_cost_matrix(Rng& rng, std::size_t rows, std::size_t cols, double lo = -5.0, double hi = 5.0) {
  CostMatrix C(rows, cols);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) C(i, j) = uniform(rng, lo, hi);
  }
  return C;
}

inline NodeCostVector random_node_costs(Rng& rng, std::size_t n, double lo = -3.0, double hi = 3.0) {
  NodeCostVector v;
  for (std::size_t i = 0; i < n; ++i) {
    v.labels.push_back({static_cast<std::uint32_t>(uniform_index(rng, 0, 3)), static_cast<std::uint32_t>(i + 1)});
    v.costs.push_back(uniform(rng, lo, hi));
  }
  return v;
}

inline Eigen::MatrixXd random_spd(Rng& rng, Eigen::Index n, double scale) {
  Eigen::MatrixXd A(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) A(i, j) = uniform(rng, -1.0, 1.0);
  }
  return scale * (A * A.transpose() + 0.5 * Eigen::MatrixXd::Identity(n, n));
}

inline GaussianMixture random_mixture(Rng& rng, Eigen::Index dim, std::size_t comps, double spread, double cov_scale) {
  GaussianMixture p;
  double total = 0.0;
  for (std::size_t c = 0; c < comps; ++c) {
    Eigen::VectorXd m(dim);
    for (Eigen::Index d = 0; d < dim; ++d) m(d) = uniform(rng, -spread, spread);
    const double w = uniform(rng, 0.2, 1.0);
    total += w;
    p.components.push_back({w, m, random_spd(rng, dim, cov_scale)});
  }
  for (auto& c : p.components) c.weight /= total;
  return p;
}

/// Constant-velocity model with measurements near the origin, used for the
/// tiny-instance checks.
inline LinearGaussianModel tiny_model(Rng& rng) {
  LinearGaussianModel m = constant_velocity_model(1.0, uniform(rng, 0.5, 3.0), uniform(rng, 1.0, 5.0));
  m.p_S = uniform(rng, 0.05, 0.95);
  m.p_D = uniform(rng, 0.05, 0.95);
  m.clutter.rate = uniform(rng, 0.5, 5.0);
  m.clutter.region = Region{Eigen::Vector2d(-50.0, -50.0), Eigen::Vector2d(50.0, 50.0)};
  return m;
}

/// One or two hypotheses over up to `max_tracks` labels with random GM tracks.
inline GlmbDensity random_tiny_density(Rng& rng, std::size_t max_tracks, std::size_t hypotheses) {
  GlmbDensity d;
  std::vector<double> w;
  for (std::size_t h = 0; h < hypotheses; ++h) {
    const std::size_t n = uniform_index(rng, 0, max_tracks);
    std::vector<Label> labels;
    std::vector<TrackDensity> tracks;
    for (std::size_t i = 0; i < n; ++i) {
      labels.push_back({0, static_cast<std::uint32_t>(i + 1)});
      tracks.push_back(make_track(random_mixture(rng, 4, uniform_index(rng, 1, 2), 5.0, 2.0)));
    }
    w.push_back(uniform(rng, 0.1, 1.0));
    d.hypotheses.emplace_back(std::move(labels), 0.0, std::move(tracks));
  }
  double total = 0.0;
  for (double x : w) total += x;
  for (std::size_t h = 0; h < hypotheses; ++h) d.hypotheses[h].log_weight = std::log(w[h] / total);
  return d;
}

inline MeasurementSet random_scan(Rng& rng, std::size_t n, double spread = 8.0) {
  MeasurementSet Z;
  for (std::size_t j = 0; j < n; ++j) Z.push_back(Eigen::Vector2d(uniform(rng, -spread, spread), uniform(rng, -spread, spread)));
  return Z;
}

inline double relative_deviation(double a, double b) {
  const double scale = std::max({std::abs(a), std::abs(b), 1e-300});
  return std::abs(a - b) / scale;
}

/// Largest relative deviation between the mixtures' weights, means and
/// covariances (matrices compared relative to their norm). Components are
/// paired after sorting each mixture by weight.
inline double mixture_deviation(const GaussianMixture& a, const GaussianMixture& b) {
  if (a.size() != b.size()) return INFINITY;
  auto by_weight = [](const GaussianMixture& p) {
    auto c = p.components;
    std::stable_sort(c.begin(), c.end(), [](const auto& u, const auto& v) { return u.weight > v.weight; });
    return c;
  };
  const auto ca = by_weight(a);
  const auto cb = by_weight(b);
  double dev = 0.0;
  for (std::size_t k = 0; k < ca.size(); ++k) {
    const auto& x = ca[k];
    const auto& y = cb[k];
    dev = std::max(dev, relative_deviation(x.weight, y.weight));
    dev = std::max(dev, (x.mean - y.mean).norm() / std::max(y.mean.norm(), 1.0));
    dev = std::max(dev, (x.cov - y.cov).norm() / std::max(y.cov.norm(), 1e-300));
  }
  return dev;
}

struct UpdateComparison {
  bool complete = true;       // every oracle child found exactly once
  double weight_deviation = 0.0;
  double track_deviation = 0.0;
  std::size_t children = 0;
};

/// Runs the library update with every association map requested and matches
/// its children to the brute-force posterior by (parent, map).
inline UpdateComparison compare_update(const GlmbDensity& prior, const MeasurementSet& Z,
                                       const LinearGaussianModel& model) {
  FilterConfig cfg;
  cfg.j_max = 1000000;
  cfg.weight_floor = 0.0;
  cfg.lookahead_enabled = false;
  cfg.mixture = {0.0, -1.0, 1000};
  std::vector<std::size_t> T;
  for (const auto& h : prior.hypotheses) T.push_back(count_association_maps(h.cardinality(), Z.size()));
  const auto got = update_step_detailed(prior, Z, model, cfg, T).density;
  const auto want = brute_force_update(prior, Z, model);

  UpdateComparison r;
  r.children = got.size();
  std::map<std::pair<std::size_t, AssociationMap>, const Hypothesis*> index;
  for (const auto& h : got.hypotheses) {
    if (!h.provenance || !index.emplace(std::make_pair(h.provenance->parent, h.provenance->association), &h).second) {
      r.complete = false;
    }
  }
  // Children whose oracle weight underflows are absent from the library output.
  for (const auto& c : want) {
    const auto it = index.find({c.parent, c.map});
    if (it == index.end()) {
      if (c.weight > 1e-300) r.complete = false;
      continue;
    }
    r.weight_deviation = std::max(r.weight_deviation, relative_deviation(it->second->weight(), c.weight));
    for (std::size_t i = 0; i < c.tracks.size(); ++i) {
      r.track_deviation = std::max(r.track_deviation, mixture_deviation(*it->second->tracks[i], c.tracks[i]));
    }
  }
  return r;
}

}  // namespace glmb::testing
