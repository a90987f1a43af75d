#pragma once

// delta-GLMB density as an enumerated hypothesis table. Each row carries a
// label set, a log weight and one Gaussian-mixture density per label. The
// association history is not stored; the row itself stands in for it.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "glmb/assignment.hpp"
#include "glmb/error.hpp"
#include "glmb/gaussian_mixture.hpp"
#include "glmb/label.hpp"

namespace glmb {

/// Track densities are immutable and shared between hypothesis rows.
using TrackDensity = std::shared_ptr<const GaussianMixture>;

inline TrackDensity make_track(GaussianMixture p) { return std::make_shared<const GaussianMixture>(std::move(p)); }

/// Debug-only record of where a row came from. Carries no semantics.
struct Provenance {
  std::size_t parent = 0;
  AssociationMap association;  // update: per label in parent order
  std::vector<Label> births;   // prediction: birth labels added
};

struct Hypothesis {
  std::vector<Label> labels;  // ascending, unique
  double log_weight = 0.0;
  std::vector<TrackDensity> tracks;  // tracks[i] belongs to labels[i]
  std::optional<Provenance> provenance;

  Hypothesis() = default;
  /// Sorts the (label, track) pairs by label; throws InputError on duplicates.
  Hypothesis(std::vector<Label> ls, double lw, std::vector<TrackDensity> ts) : log_weight(lw) {
    if (ls.size() != ts.size()) throw InputError("hypothesis: label and track counts differ");
    std::vector<std::size_t> idx(ls.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return ls[a] < ls[b]; });
    for (std::size_t i : idx) {
      if (!labels.empty() && labels.back() == ls[i]) throw InputError("hypothesis: duplicate label");
      labels.push_back(ls[i]);
      tracks.push_back(std::move(ts[i]));
    }
  }

  std::size_t cardinality() const noexcept { return labels.size(); }
  double weight() const { return std::exp(log_weight); }

  bool contains(const Label& l) const { return std::binary_search(labels.begin(), labels.end(), l); }

  const GaussianMixture& track(const Label& l) const {
    const auto it = std::lower_bound(labels.begin(), labels.end(), l);
    if (it == labels.end() || *it != l) throw InputError("hypothesis has no track for the requested label");
    return *tracks[static_cast<std::size_t>(it - labels.begin())];
  }
};

struct GlmbDensity {
  std::vector<Hypothesis> hypotheses;
  std::uint32_t time_index = 0;

  /// One hypothesis with no targets and weight 1.
  static GlmbDensity empty_prior(std::uint32_t time = 0) {
    GlmbDensity d;
    d.time_index = time;
    d.hypotheses.emplace_back();
    return d;
  }

  std::size_t size() const noexcept { return hypotheses.size(); }

  std::vector<double> weights() const {
    std::vector<double> w;
    w.reserve(hypotheses.size());
    for (const auto& h : hypotheses) w.push_back(h.weight());
    return w;
  }
};

/// Weights rescaled to sum to one, computed in the log domain.
inline GlmbDensity normalize(GlmbDensity density) {
  std::vector<double> lw;
  lw.reserve(density.hypotheses.size());
  for (const auto& h : density.hypotheses) lw.push_back(h.log_weight);
  const double lse = log_sum_exp(lw);
  if (!std::isfinite(lse)) throw DegenerateDensityError("normalize: every hypothesis weight is zero");
  for (auto& h : density.hypotheses) h.log_weight -= lse;
  return density;
}

struct TruncationError {
  double absolute = 0.0;          // ||f_H - f_T||_1, the discarded weight
  double normalized_bound = 0.0;  // 2 (||f_H|| - ||f_T||) / ||f_H||
};

inline TruncationError l1_truncation_error(double kept_weight_sum, double total_weight_sum) {
  if (!(total_weight_sum > 0.0)) throw DegenerateDensityError("l1_truncation_error: total weight is zero");
  if (kept_weight_sum < 0.0 || kept_weight_sum > total_weight_sum * (1.0 + 1e-12)) {
    throw InputError("l1_truncation_error: kept weight must lie in [0, total]");
  }
  const double discarded = std::max(0.0, total_weight_sum - kept_weight_sum);
  return {discarded, 2.0 * discarded / total_weight_sum};
}

struct PruneResult {
  GlmbDensity density;
  TruncationError error;
};

/// Keeps the `cap` heaviest rows (ties: label set, then table order), in their
/// original order, and renormalizes. The error refers to the input weights.
inline PruneResult prune_to_cap(const GlmbDensity& density, std::size_t cap) {
  if (cap == 0) throw InputError("prune_to_cap: cap must be at least 1");
  if (density.hypotheses.size() <= cap) return {density, {}};
  const auto& hs = density.hypotheses;
  std::vector<std::size_t> idx(hs.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    if (hs[a].log_weight != hs[b].log_weight) return hs[a].log_weight > hs[b].log_weight;
    return hs[a].labels < hs[b].labels;
  });
  idx.resize(cap);
  std::sort(idx.begin(), idx.end());

  double mx = -std::numeric_limits<double>::infinity();
  for (const auto& h : hs) mx = std::max(mx, h.log_weight);
  double total = 0.0, kept = 0.0;
  for (const auto& h : hs) total += std::exp(h.log_weight - mx);
  for (std::size_t i : idx) kept += std::exp(hs[i].log_weight - mx);

  GlmbDensity out;
  out.time_index = density.time_index;
  out.hypotheses.reserve(cap);
  for (std::size_t i : idx) out.hypotheses.push_back(hs[i]);
  // Sums are taken relative to the heaviest row; rescale the absolute part.
  TruncationError err = l1_truncation_error(kept, total);
  err.absolute *= std::exp(mx);
  return {normalize(std::move(out)), err};
}

/// rho(n) for n = 0..n_max.
inline std::vector<double> cardinality_distribution(const GlmbDensity& density, std::size_t n_max) {
  std::vector<double> rho(n_max + 1, 0.0);
  for (const auto& h : density.hypotheses) {
    if (h.cardinality() <= n_max) rho[h.cardinality()] += h.weight();
  }
  return rho;
}

inline double expected_cardinality(const GlmbDensity& density) {
  double s = 0.0;
  for (const auto& h : density.hypotheses) s += h.weight() * static_cast<double>(h.cardinality());
  return s;
}

/// Existence probability of every label present in any row.
inline std::map<Label, double> existence_probabilities(const GlmbDensity& density) {
  std::map<Label, double> r;
  for (const auto& h : density.hypotheses) {
    const double w = h.weight();
    for (const auto& l : h.labels) r[l] += w;
  }
  return r;
}

/// 1 / sum w^2 over normalized weights.
inline double effective_sample_size(const GlmbDensity& density) {
  double s = 0.0;
  for (const auto& h : density.hypotheses) s += h.weight() * h.weight();
  return s > 0.0 ? 1.0 / s : 0.0;
}

namespace detail {
inline bool same_mixture(const GaussianMixture& a, const GaussianMixture& b, double tol) {
  if (&a == &b) return true;
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto& x = a.components[i];
    const auto& y = b.components[i];
    if (std::abs(x.weight - y.weight) > tol || x.mean.size() != y.mean.size()) return false;
    if ((x.mean - y.mean).cwiseAbs().maxCoeff() > tol) return false;
    if ((x.cov - y.cov).cwiseAbs().maxCoeff() > tol) return false;
  }
  return true;
}
}  // namespace detail

/// Merges rows with equal label sets and matching track parameters (within
/// `tol`) by adding their weights. Off in the filter unless requested.
inline GlmbDensity merge_identical(const GlmbDensity& density, double tol = 1e-9) {
  GlmbDensity out;
  out.time_index = density.time_index;
  std::map<std::vector<Label>, std::vector<std::size_t>> by_labels;
  for (const auto& h : density.hypotheses) {
    auto& bucket = by_labels[h.labels];
    bool merged = false;
    for (std::size_t k : bucket) {
      auto& g = out.hypotheses[k];
      bool same = true;
      for (std::size_t i = 0; same && i < h.tracks.size(); ++i) same = detail::same_mixture(*g.tracks[i], *h.tracks[i], tol);
      if (same) {
        const double mx = std::max(g.log_weight, h.log_weight);
        g.log_weight = mx + std::log(std::exp(g.log_weight - mx) + std::exp(h.log_weight - mx));
        merged = true;
        break;
      }
    }
    if (!merged) {
      bucket.push_back(out.hypotheses.size());
      out.hypotheses.push_back(h);
    }
  }
  return out;
}

}  // namespace glmb
