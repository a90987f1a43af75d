#pragma once

// Linear-Gaussian multi-target scenarios: ground truth on straight (or
// optionally noisy) paths, plus detections and Poisson clutter.
//
// Randomness comes from std::mt19937_64, whose output sequence is fixed by
// the C++ standard, driven through Boost.Random distributions, whose
// algorithms do not vary between standard libraries. A seed therefore gives
// the same scans on every platform.

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <boost/random/bernoulli_distribution.hpp>
#include <boost/random/normal_distribution.hpp>
#include <boost/random/poisson_distribution.hpp>
#include <boost/random/uniform_real_distribution.hpp>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "glmb/error.hpp"
#include "glmb/gm_track.hpp"
#include "glmb/model.hpp"

namespace glmb {

struct TruthTrack {
  std::size_t birth = 0;  // first step alive
  std::size_t death = 0;  // first step no longer alive
  Eigen::VectorXd initial;
  std::string note;
};

struct ScenarioSpec {
  std::size_t duration = 0;
  LinearGaussianModel model;
  std::vector<TruthTrack> tracks;
  std::uint64_t seed = 0;
  bool noisy_truth = false;

  const Region& region() const { return model.clutter.region; }

  std::vector<std::string> problems() const {
    auto out = model.problems();
    if (duration == 0) out.push_back("scenario.duration must be at least 1");
    for (std::size_t t = 0; t < tracks.size(); ++t) {
      const auto& tr = tracks[t];
      const std::string tag = "scenario.tracks[" + std::to_string(t) + "]";
      if (!(tr.birth < tr.death && tr.death <= duration)) {
        out.push_back(tag + " needs birth < death <= duration");
      }
      if (tr.initial.size() != model.state_dim()) {
        out.push_back(tag + ".state must have " + std::to_string(model.state_dim()) + " entries");
      } else if (model.H.cols() == tr.initial.size() && model.clutter.region.lower.size() == model.H.rows() &&
                 !model.clutter.region.contains(model.H * tr.initial)) {
        out.push_back(tag + " starts outside the region");
      }
    }
    return out;
  }

  void validate() const {
    auto p = problems();
    if (!p.empty()) throw InputError(p.front());
  }
};

struct TruthState {
  std::size_t track = 0;  // index into ScenarioSpec::tracks
  Eigen::VectorXd state;
};

/// truth[k] lists the targets alive at step k, in track order.
using Truth = std::vector<std::vector<TruthState>>;

inline std::vector<std::size_t> true_cardinality(const Truth& truth) {
  std::vector<std::size_t> n;
  n.reserve(truth.size());
  for (const auto& s : truth) n.push_back(s.size());
  return n;
}

namespace detail {
inline Eigen::VectorXd gaussian_draw(std::mt19937_64& rng, const Eigen::MatrixXd& L) {
  boost::random::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd n(L.rows());
  for (Eigen::Index i = 0; i < n.size(); ++i) n(i) = normal(rng);
  return L * n;
}

inline Eigen::MatrixXd noise_factor(const Eigen::MatrixXd& cov) {
  // LDLT tolerates the rank-deficient Q of the constant-velocity model.
  Eigen::LDLT<Eigen::MatrixXd> ldlt(cov);
  if (ldlt.info() != Eigen::Success) throw NumericalError("noise covariance is not positive semi-definite");
  const Eigen::VectorXd d = ldlt.vectorD().cwiseMax(0.0).cwiseSqrt();
  Eigen::MatrixXd L = ldlt.matrixL();
  return ldlt.transpositionsP().transpose() * (L * d.asDiagonal());
}
}  // namespace detail

inline Truth generate_truth(const ScenarioSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  const Eigen::MatrixXd LQ = detail::noise_factor(spec.model.Q);
  Truth truth(spec.duration);
  for (std::size_t t = 0; t < spec.tracks.size(); ++t) {
    const auto& tr = spec.tracks[t];
    Eigen::VectorXd x = tr.initial;
    for (std::size_t k = tr.birth; k < tr.death; ++k) {
      if (k > tr.birth) {
        x = spec.model.F * x;
        if (spec.noisy_truth) x += detail::gaussian_draw(rng, LQ);
      }
      truth[k].push_back({t, x});
    }
  }
  return truth;
}

/// Per step: each live target detected with probability p_D as Hx + N(0, R),
/// plus Poisson(rate) clutter points uniform over the region.
inline std::vector<MeasurementSet> generate_measurements(const Truth& truth, const LinearGaussianModel& model,
                                                         std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const Eigen::MatrixXd LR = detail::noise_factor(model.R);
  const auto& region = model.clutter.region;
  std::vector<MeasurementSet> scans(truth.size());
  for (std::size_t k = 0; k < truth.size(); ++k) {
    for (const auto& target : truth[k]) {
      boost::random::bernoulli_distribution<double> detected(model.p_D);
      if (detected(rng)) scans[k].push_back(model.H * target.state + detail::gaussian_draw(rng, LR));
    }
    std::uint64_t n_clutter = 0;
    if (model.clutter.rate > 0.0) {
      boost::random::poisson_distribution<std::uint64_t, double> count(model.clutter.rate);
      n_clutter = count(rng);
    }
    for (std::uint64_t c = 0; c < n_clutter; ++c) {
      Measurement z(region.lower.size());
      for (Eigen::Index d = 0; d < z.size(); ++d) {
        boost::random::uniform_real_distribution<double> u(region.lower(d), region.upper(d));
        z(d) = u(rng);
      }
      scans[k].push_back(std::move(z));
    }
  }
  return scans;
}

/// The ten-track reference scenario over 100 steps. Tracks 1 to 3 cross at
/// the origin at step 20; tracks 4 and 5 cross at (300, 0) and tracks 6 and
/// 7 at (-300, 0), both at step 40. Every track starts at a birth mean.
inline ScenarioSpec reference_scenario() {
  ScenarioSpec s;
  s.duration = 100;
  s.model = reference_model();
  s.seed = 0;
  struct Row {
    std::size_t birth, death;
    double px, py, vx, vy;
    const char* note;
  };
  const Row rows[] = {
      {0, 70, 0, 100, 0, -5, "reaches the origin at step 20"},
      {0, 100, -100, -100, 5, 5, "reaches the origin at step 20"},
      {0, 100, 100, -100, -5, 5, "reaches the origin at step 20"},
      {10, 80, 100, -100, 20.0 / 3.0, 10.0 / 3.0, "reaches (300, 0) at step 40"},
      {20, 85, 0, 100, 15, -5, "reaches (300, 0) at step 40"},
      {10, 90, -100, -100, -20.0 / 3.0, 10.0 / 3.0, "reaches (-300, 0) at step 40"},
      {20, 100, -100, -100, -10, 5, "reaches (-300, 0) at step 40"},
      {40, 100, 100, -100, 10, -10, "late birth heading south-east"},
      {50, 100, 0, 100, -8, 12, "late birth heading north-west"},
      {60, 100, -100, -100, -12, -6, "late birth heading south-west"},
  };
  for (const auto& r : rows) {
    Eigen::VectorXd x(4);
    x << r.px, r.py, r.vx, r.vy;
    s.tracks.push_back({r.birth, r.death, x, r.note});
  }
  return s;
}

}  // namespace glmb
