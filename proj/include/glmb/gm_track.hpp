#pragma once

// Single-track Gaussian-mixture algebra for the linear-Gaussian model:
// prediction, Kalman measurement update, assignment costs, survival and birth
// log-odds costs, and the PHD masses used for look-ahead.

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <sstream>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "glmb/assignment.hpp"
#include "glmb/error.hpp"
#include "glmb/gaussian_mixture.hpp"
#include "glmb/glmb_density.hpp"
#include "glmb/k_shortest.hpp"
#include "glmb/label.hpp"
#include "glmb/model.hpp"

namespace glmb {

using Measurement = Eigen::VectorXd;
using MeasurementSet = std::vector<Measurement>;

/// Below this a linear-domain ratio is zero in double precision.
inline const double kLogUnderflow = std::log(std::numeric_limits<double>::min());

// ---------------------------------------------------------------- prediction

inline GaussianMixture predict_track(const GaussianMixture& p, const LinearGaussianModel& model,
                                     const Label& label = {}) {
  const auto mp = model.motion(label);
  GaussianMixture out;
  out.components.reserve(p.size());
  for (const auto& c : p.components) {
    if (c.mean.size() != mp.F.cols() || c.cov.rows() != mp.F.cols()) {
      throw InputError("predict_track: component dimension " + std::to_string(c.mean.size()) +
                       " does not match F (" + std::to_string(mp.F.cols()) + ")");
    }
    Eigen::MatrixXd P = mp.Q + mp.F * c.cov * mp.F.transpose();
    symmetrize(P);
    out.components.push_back({c.weight, mp.F * c.mean, std::move(P)});
  }
  return out;
}

/// <p_S, p>; the survival probability is state independent here.
inline double eta_survival(const GaussianMixture& /*p*/, const LinearGaussianModel& model, const Label& label = {}) {
  return model.motion(label).p_S;
}

/// -ln(eta / (1 - eta)); throws for eta outside (0,1).
inline double log_odds_cost(double eta) {
  if (!(eta > 0.0 && eta < 1.0)) {
    throw InfiniteCostError("probability " + std::to_string(eta) + " gives an infinite log-odds cost");
  }
  return std::log1p(-eta) - std::log(eta);
}

inline NodeCostVector survival_cost_vector(const std::vector<Label>& labels, std::span<const double> etas) {
  if (labels.size() != etas.size()) throw InputError("survival_cost_vector: one eta per label required");
  NodeCostVector v{labels, {}};
  v.costs.reserve(etas.size());
  for (double e : etas) v.costs.push_back(log_odds_cost(e));
  return v;
}

inline NodeCostVector birth_cost_vector(const LinearGaussianModel& model, std::uint32_t time = 0) {
  NodeCostVector v{model.birth_labels(time), {}};
  for (const auto& b : model.birth) v.costs.push_back(log_odds_cost(b.existence));
  return v;
}

/// ln w_B(L) for the birth terms at indices `members` (0-based, into model.birth).
inline double log_birth_weight(std::span<const std::size_t> members, const LinearGaussianModel& model) {
  double lw = 0.0;
  for (const auto& b : model.birth) lw += std::log1p(-b.existence);
  for (std::size_t i : members) {
    if (i >= model.birth.size()) throw InputError("birth_weight: index outside the birth model");
    const double r = model.birth[i].existence;
    lw += std::log(r) - std::log1p(-r);
  }
  return lw;
}

inline double birth_weight(std::span<const std::size_t> members, const LinearGaussianModel& model) {
  return std::exp(log_birth_weight(members, model));
}

// ---------------------------------------------------------------- update

/// Measurement-independent parts of the Kalman update for each component.
class TrackInnovation {
 public:
  TrackInnovation(const GaussianMixture& p, const MeasurementParams& mp) : p_D_(mp.p_D) {
    comps_.reserve(p.size());
    double total = 0.0;
    for (const auto& c : p.components) {
      if (c.mean.size() != mp.H.cols()) throw InputError("track dimension does not match H");
      Component k;
      k.log_weight = std::log(c.weight);
      k.predicted_z = mp.H * c.mean;
      const Eigen::MatrixXd PHt = c.cov * mp.H.transpose();
      Eigen::MatrixXd S = mp.H * PHt + mp.R;
      symmetrize(S);
      k.S.compute(S);
      if (k.S.info() != Eigen::Success) throw NumericalError("innovation covariance is singular");
      const auto d = static_cast<double>(S.rows());
      k.log_norm = -0.5 * (2.0 * k.S.matrixLLT().diagonal().array().log().sum() + d * kLog2Pi);
      k.gain = k.S.solve(PHt.transpose()).transpose();
      const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(c.cov.rows(), c.cov.cols());
      k.posterior_cov = (I - k.gain * mp.H) * c.cov;
      symmetrize(k.posterior_cov);
      k.prior_mean = &c.mean;
      comps_.push_back(std::move(k));
      total += c.weight;
    }
    log_total_weight_ = std::log(total);
  }

  double p_D() const noexcept { return p_D_; }

  /// ln <p, 1 - p_D>.
  double log_eta_miss() const { return std::log1p(-p_D_) + log_total_weight_; }

  /// ln( p_D sum_k w_k q_k(z) ).
  double log_detection_likelihood(const Measurement& z) const {
    if (comps_.size() == 1) return std::log(p_D_) + component_log_term(0, z);
    std::vector<double> terms(comps_.size());
    for (std::size_t i = 0; i < comps_.size(); ++i) terms[i] = component_log_term(i, z);
    return std::log(p_D_) + log_sum_exp(terms);
  }

  /// ln eta_Z for a detection of z under clutter intensity kappa.
  double log_eta_detect(const Measurement& z, double kappa) const {
    return log_detection_likelihood(z) - std::log(kappa);
  }

  /// Assignment cost ln eta_miss - ln eta_detect, or +inf when the linear
  /// ratio eta_detect / eta_miss underflows.
  double cost_from(double log_eta_det) const {
    const double log_ratio = log_eta_det - log_eta_miss();
    return log_ratio < kLogUnderflow ? kForbidden : -log_ratio;
  }

  double cost(const Measurement& z, double kappa) const { return cost_from(log_eta_detect(z, kappa)); }

  /// Posterior for detection z with ln eta_Z; nullopt exactly when the cost is +inf.
  std::optional<std::pair<double, GaussianMixture>> detect(const Measurement& z, double kappa) const {
    std::vector<double> lw(comps_.size());
    for (std::size_t i = 0; i < comps_.size(); ++i) lw[i] = component_log_term(i, z);
    const double lse = log_sum_exp(lw);
    const double log_eta = std::log(p_D_) + lse - std::log(kappa);
    if (cost_from(log_eta) == kForbidden) return std::nullopt;
    GaussianMixture post;
    post.components.reserve(comps_.size());
    for (std::size_t i = 0; i < comps_.size(); ++i) {
      const auto& k = comps_[i];
      post.components.push_back(
          {std::exp(lw[i] - lse), *k.prior_mean + k.gain * (z - k.predicted_z), k.posterior_cov});
    }
    return std::make_pair(log_eta, std::move(post));
  }

 private:
  struct Component {
    double log_weight = 0.0;
    Eigen::VectorXd predicted_z;
    Eigen::LLT<Eigen::MatrixXd> S;
    double log_norm = 0.0;
    Eigen::MatrixXd gain;
    Eigen::MatrixXd posterior_cov;
    const Eigen::VectorXd* prior_mean = nullptr;
  };

  double component_log_term(std::size_t i, const Measurement& z) const {
    const auto& k = comps_[i];
    if (z.size() != k.predicted_z.size()) throw InputError("measurement dimension does not match H");
    const Eigen::VectorXd y = k.S.matrixL().solve(z - k.predicted_z);
    return k.log_weight + k.log_norm - 0.5 * y.squaredNorm();
  }

  double p_D_;
  double log_total_weight_ = 0.0;
  std::vector<Component> comps_;
};

/// C_{i,j} for every (track, measurement) pair of one hypothesis.
inline CostMatrix cost_matrix_update(const Hypothesis& hyp, const MeasurementSet& Z,
                                     const LinearGaussianModel& model) {
  CostMatrix C(hyp.cardinality(), Z.size());
  std::vector<double> kappa(Z.size());
  for (std::size_t j = 0; j < Z.size(); ++j) {
    kappa[j] = model.clutter.intensity(Z[j]);
    if (!(kappa[j] > 0.0)) throw InputError("clutter intensity must be positive at every measurement");
  }
  for (std::size_t i = 0; i < hyp.cardinality(); ++i) {
    try {
      const TrackInnovation inn(*hyp.tracks[i], model.measurement(hyp.labels[i]));
      for (std::size_t j = 0; j < Z.size(); ++j) C(i, j) = inn.cost(Z[j], kappa[j]);
    } catch (const NumericalError& e) {
      std::ostringstream os;
      os << "cost_matrix_update: track " << hyp.labels[i] << ": " << e.what();
      throw NumericalError(os.str());
    }
  }
  return C;
}

struct TrackUpdate {
  double log_eta = 0.0;  // ln eta_Z
  GaussianMixture posterior;

  double eta() const { return std::exp(log_eta); }
};

/// Updates one track for association `assoc` (0 = misdetected, j = Z[j-1]).
/// Returns nullopt for a zero-likelihood detection; the caller drops it.
inline std::optional<TrackUpdate> update_track(const GaussianMixture& p, int assoc, const MeasurementSet& Z,
                                               const LinearGaussianModel& model, const Label& label = {}) {
  if (assoc < 0 || static_cast<std::size_t>(assoc) > Z.size()) {
    throw InputError("update_track: association " + std::to_string(assoc) + " outside 0.." +
                     std::to_string(Z.size()));
  }
  const auto mp = model.measurement(label);
  if (assoc == 0) {
    GaussianMixture post = p;
    const double w = post.total_weight();
    post.normalize();
    return TrackUpdate{std::log1p(-mp.p_D) + std::log(w), std::move(post)};
  }
  const Measurement& z = Z[static_cast<std::size_t>(assoc - 1)];
  const TrackInnovation inn(p, mp);
  auto r = inn.detect(z, model.clutter.intensity(z));
  if (!r) return std::nullopt;
  return TrackUpdate{r->first, std::move(r->second)};
}

// ---------------------------------------------------------------- PHD masses

/// Mass of the hypothesis PHD: weight times cardinality.
inline double phd_mass(const Hypothesis& hyp) { return hyp.weight() * static_cast<double>(hyp.cardinality()); }

/// Per-track detection likelihoods p_D sum_k w_k q_k(z_j), cached by track object.
class DetectionLikelihoodCache {
 public:
  DetectionLikelihoodCache(const MeasurementSet& Z, const LinearGaussianModel& model) : Z_(Z), model_(model) {}

  const std::vector<double>& get(const TrackDensity& track, const Label& label) {
    auto [it, inserted] = cache_.try_emplace(track.get());
    if (inserted) {
      const TrackInnovation inn(*track, model_.measurement(label));
      it->second.reserve(Z_.size());
      for (const auto& z : Z_) it->second.push_back(std::exp(inn.log_detection_likelihood(z)));
    }
    return it->second;
  }

 private:
  const MeasurementSet& Z_;
  const LinearGaussianModel& model_;
  std::unordered_map<const GaussianMixture*, std::vector<double>> cache_;
};

/// Mass of each hypothesis' constituent updated PHD: its misdetection mass
/// plus its share of every measurement under the pooled PHD denominator.
/// `detection_row(h, i)` yields p_D sum_k w_k q_k(z_j) over j for track i of
/// hypothesis h.
template <class RowFn>
std::vector<double> constituent_updated_phd_mass(std::span<const Hypothesis> hypotheses, const MeasurementSet& Z,
                                                 const LinearGaussianModel& model, RowFn&& detection_row) {
  std::vector<double> denom(Z.size());
  for (std::size_t j = 0; j < Z.size(); ++j) denom[j] = model.clutter.intensity(Z[j]);
  std::vector<std::vector<double>> det(hypotheses.size(), std::vector<double>(Z.size(), 0.0));
  std::vector<double> miss(hypotheses.size(), 0.0);
  for (std::size_t h = 0; h < hypotheses.size(); ++h) {
    const auto& hyp = hypotheses[h];
    const double w = hyp.weight();
    for (std::size_t i = 0; i < hyp.cardinality(); ++i) {
      const std::vector<double>& L = detection_row(h, i);
      const double pd = model.measurement(hyp.labels[i]).p_D;
      miss[h] += w * (1.0 - pd) * hyp.tracks[i]->total_weight();
      for (std::size_t j = 0; j < Z.size(); ++j) det[h][j] += w * L[j];
    }
    for (std::size_t j = 0; j < Z.size(); ++j) denom[j] += det[h][j];
  }
  std::vector<double> mass(hypotheses.size());
  for (std::size_t h = 0; h < hypotheses.size(); ++h) {
    double m = miss[h];
    for (std::size_t j = 0; j < Z.size(); ++j) m += det[h][j] / denom[j];
    mass[h] = m;
  }
  return mass;
}

inline std::vector<double> constituent_updated_phd_mass(std::span<const Hypothesis> hypotheses,
                                                        const MeasurementSet& Z,
                                                        const LinearGaussianModel& model) {
  DetectionLikelihoodCache cache(Z, model);
  return constituent_updated_phd_mass(hypotheses, Z, model, [&](std::size_t h, std::size_t i) -> const std::vector<double>& {
    return cache.get(hypotheses[h].tracks[i], hypotheses[h].labels[i]);
  });
}

}  // namespace glmb
