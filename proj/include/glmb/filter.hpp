#pragma once

// The delta-GLMB recursion: prediction via K-shortest survivor/birth subsets,
// update via ranked assignment, look-ahead allocation of per-hypothesis
// request counts, MAP state extraction and the main loop.
//
// Per-hypothesis work runs on a TBB arena. Each task writes to its own slot
// and slots are merged in hypothesis order, so results do not depend on the
// thread count.

#include <tbb/blocked_range.h>
#include <tbb/parallel_for.h>
#include <tbb/task_arena.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "glmb/assignment.hpp"
#include "glmb/error.hpp"
#include "glmb/gaussian_mixture.hpp"
#include "glmb/glmb_density.hpp"
#include "glmb/gm_track.hpp"
#include "glmb/k_shortest.hpp"
#include "glmb/model.hpp"

namespace glmb {

struct FilterConfig {
  std::size_t j_max = 7777;
  double birth_mass_fraction = 0.99;
  double lookahead_mass_fraction = 0.95;
  bool lookahead_enabled = true;
  std::size_t n_max = 100;
  double weight_floor = 1e-15;
  MixtureLimits mixture;
  unsigned threads = 1;  // 0 = one per hardware thread
  bool merge_identical = false;

  std::vector<std::string> problems() const {
    std::vector<std::string> out;
    if (j_max < 1) out.push_back("filter.j_max must be at least 1");
    if (!(birth_mass_fraction > 0.0 && birth_mass_fraction <= 1.0)) {
      out.push_back("filter.birth_mass_fraction must lie in (0,1]");
    }
    if (!(lookahead_mass_fraction > 0.0 && lookahead_mass_fraction <= 1.0)) {
      out.push_back("filter.lookahead_mass_fraction must lie in (0,1]");
    }
    if (!(weight_floor >= 0.0 && weight_floor < 1.0)) out.push_back("filter.weight_floor must lie in [0,1)");
    if (mixture.max_components < 1) out.push_back("filter.max_components must be at least 1");
    return out;
  }

  void validate() const {
    auto p = problems();
    if (!p.empty()) throw InputError(p.front());
  }
};

struct StateEstimate {
  std::uint32_t time = 0;
  std::map<Label, Eigen::VectorXd> tracks;
  std::size_t cardinality = 0;
};

namespace detail {

template <class F>
void parallel_for_index(std::size_t n, unsigned threads, F&& f) {
  if (threads == 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) f(i);
    return;
  }
  tbb::task_arena arena(threads == 0 ? tbb::task_arena::automatic : static_cast<int>(threads));
  arena.execute([&] {
    tbb::parallel_for(tbb::blocked_range<std::size_t>(0, n), [&](const tbb::blocked_range<std::size_t>& r) {
      for (std::size_t i = r.begin(); i != r.end(); ++i) f(i);
    });
  });
}

inline std::size_t weight_share(double weight, std::size_t j_max) {
  const double t = std::ceil(weight * static_cast<double>(j_max));
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::min(t, static_cast<double>(j_max))));
}

struct Truncation {
  GlmbDensity density;
  double total_log_weight = 0.0;  // ln of the pooled unnormalized weight
  double kept_fraction = 1.0;     // kept share of the pooled weight
};

// Normalizes the pooled rows, drops rows under the floor, caps at j_max.
inline Truncation truncate_pool(GlmbDensity pool, const FilterConfig& cfg) {
  if (pool.hypotheses.empty()) throw DegenerateDensityError("no hypothesis survived the step");
  std::vector<double> lw;
  lw.reserve(pool.size());
  for (const auto& h : pool.hypotheses) lw.push_back(h.log_weight);
  const double lse = log_sum_exp(lw);
  if (!std::isfinite(lse)) throw DegenerateDensityError("every hypothesis weight is zero");
  for (auto& h : pool.hypotheses) h.log_weight -= lse;
  if (cfg.merge_identical) pool = merge_identical(pool);

  double floor_kept = 0.0;
  GlmbDensity above;
  above.time_index = pool.time_index;
  const double log_floor = cfg.weight_floor > 0.0 ? std::log(cfg.weight_floor) : -INFINITY;
  for (auto& h : pool.hypotheses) {
    if (h.log_weight >= log_floor) {
      floor_kept += h.weight();
      above.hypotheses.push_back(std::move(h));
    }
  }
  if (above.hypotheses.empty()) throw DegenerateDensityError("every hypothesis fell below the weight floor");
  auto pruned = prune_to_cap(above, cfg.j_max);
  return {normalize(std::move(pruned.density)), lse, std::max(0.0, floor_kept - pruned.error.absolute)};
}

}  // namespace detail

// ---------------------------------------------------------------- update

struct UpdateStats {
  std::vector<std::size_t> requested;  // T per prior hypothesis
  std::size_t ranked_assignment_calls = 0;
  std::size_t children = 0;
  double prune_error = 0.0;  // normalized weight discarded by floor and cap
};

struct UpdateResult {
  GlmbDensity density;
  UpdateStats stats;
};

namespace detail {

// Per-step table of everything the update needs from each distinct track.
class UpdateCache {
 public:
  struct Row {
    TrackDensity track;
    Label label;
    std::optional<TrackInnovation> innovation;
    double log_eta_miss = 0.0;
    std::vector<double> log_eta_detect;   // per measurement
    std::vector<double> cost;             // per measurement, +inf when forbidden
    std::vector<double> detection_mass;   // p_D sum w q, linear
  };

  UpdateCache(const GlmbDensity& prior, const MeasurementSet& Z, const LinearGaussianModel& model,
              unsigned threads)
      : Z_(Z) {
    kappa_.resize(Z.size());
    for (std::size_t j = 0; j < Z.size(); ++j) {
      kappa_[j] = model.clutter.intensity(Z[j]);
      if (!(kappa_[j] > 0.0)) throw InputError("clutter intensity must be positive at every measurement");
    }
    index_.resize(prior.size());
    std::unordered_map<const GaussianMixture*, std::size_t> seen;
    for (std::size_t h = 0; h < prior.size(); ++h) {
      const auto& hyp = prior.hypotheses[h];
      for (std::size_t i = 0; i < hyp.cardinality(); ++i) {
        auto [it, inserted] = seen.try_emplace(hyp.tracks[i].get(), rows_.size());
        if (inserted) rows_.push_back(Row{hyp.tracks[i], hyp.labels[i], std::nullopt, 0.0, {}, {}, {}});
        index_[h].push_back(it->second);
      }
    }
    parallel_for_index(rows_.size(), threads, [&](std::size_t r) {
      Row& row = rows_[r];
      row.innovation.emplace(*row.track, model.measurement(row.label));
      const auto& inn = *row.innovation;
      row.log_eta_miss = inn.log_eta_miss();
      row.log_eta_detect.resize(Z.size());
      row.cost.resize(Z.size());
      row.detection_mass.resize(Z.size());
      for (std::size_t j = 0; j < Z.size(); ++j) {
        const double lik = inn.log_detection_likelihood(Z[j]);
        row.log_eta_detect[j] = lik - std::log(kappa_[j]);
        row.cost[j] = inn.cost_from(row.log_eta_detect[j]);
        row.detection_mass[j] = std::exp(lik);
      }
    });
  }

  const Row& row(std::size_t h, std::size_t i) const { return rows_[index_[h][i]]; }
  std::size_t row_index(std::size_t h, std::size_t i) const { return index_[h][i]; }
  const Row& row(std::size_t r) const { return rows_[r]; }
  double kappa(std::size_t j) const { return kappa_[j]; }

  CostMatrix cost_matrix(std::size_t h) const {
    CostMatrix C(index_[h].size(), Z_.size());
    for (std::size_t i = 0; i < index_[h].size(); ++i) {
      const auto& c = rows_[index_[h][i]].cost;
      for (std::size_t j = 0; j < c.size(); ++j) C(i, j) = c[j];
    }
    return C;
  }

 private:
  const MeasurementSet& Z_;
  std::vector<double> kappa_;
  std::vector<Row> rows_;
  std::vector<std::vector<std::size_t>> index_;
};

// Requested counts from per-hypothesis PHD masses.
inline std::vector<std::size_t> allocate_from_masses(const GlmbDensity& prior, std::span<const double> mass,
                                                     const FilterConfig& cfg) {
  const std::size_t n = prior.size();
  std::vector<std::size_t> T(n, 0);
  double total = 0.0;
  for (double m : mass) total += m;
  if (!(total > 0.0)) {
    for (std::size_t h = 0; h < n; ++h) T[h] = weight_share(prior.hypotheses[h].weight(), cfg.j_max);
    return T;
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return mass[a] > mass[b]; });
  const double target = cfg.lookahead_mass_fraction * total * (1.0 - 1e-12);
  double covered = 0.0;
  for (std::size_t h : order) {
    if (covered >= target) break;
    covered += mass[h];
    T[h] = weight_share(mass[h] / total, cfg.j_max);
  }
  // The empty label set has no PHD mass but is the only carrier of n = 0.
  for (std::size_t h = 0; h < n; ++h) {
    if (prior.hypotheses[h].cardinality() == 0) T[h] = std::max<std::size_t>(T[h], 1);
  }
  return T;
}

}  // namespace detail

/// Requested ranked-assignment count per hypothesis from constituent updated
/// PHD masses: the heaviest prefix covering the configured share of the total
/// mass is kept with counts proportional to mass; the rest get zero.
inline std::vector<std::size_t> lookahead_allocate(const GlmbDensity& prior, const MeasurementSet& Z,
                                                   const LinearGaussianModel& model, const FilterConfig& cfg) {
  const auto mass = constituent_updated_phd_mass(prior.hypotheses, Z, model);
  return detail::allocate_from_masses(prior, mass, cfg);
}

/// Update with statistics. `requested`, when non-empty, fixes T per hypothesis.
inline UpdateResult update_step_detailed(const GlmbDensity& prior, const MeasurementSet& Z,
                                         const LinearGaussianModel& model, const FilterConfig& cfg,
                                         std::span<const std::size_t> requested = {}) {
  if (prior.hypotheses.empty()) throw InputError("update_step: prior density has no hypotheses");
  if (!requested.empty() && requested.size() != prior.size()) {
    throw InputError("update_step: one requested count per hypothesis required");
  }
  const std::size_t H = prior.size();
  const detail::UpdateCache cache(prior, Z, model, cfg.threads);

  UpdateStats stats;
  if (!requested.empty()) {
    stats.requested.assign(requested.begin(), requested.end());
  } else if (cfg.lookahead_enabled) {
    const auto mass = constituent_updated_phd_mass(
        prior.hypotheses, Z, model,
        [&](std::size_t h, std::size_t i) -> const std::vector<double>& { return cache.row(h, i).detection_mass; });
    stats.requested = detail::allocate_from_masses(prior, mass, cfg);
  } else {
    stats.requested.resize(H);
    for (std::size_t h = 0; h < H; ++h) {
      stats.requested[h] = detail::weight_share(prior.hypotheses[h].weight(), cfg.j_max);
    }
  }

  // Ranked association maps per hypothesis.
  std::vector<std::vector<RankedSolution>> solutions(H);
  detail::parallel_for_index(H, cfg.threads, [&](std::size_t h) {
    const std::size_t T = stats.requested[h];
    if (T == 0) return;
    if (prior.hypotheses[h].cardinality() == 0) {
      solutions[h].push_back({{}, 0.0});
      return;
    }
    solutions[h] = ranked_assignments(cache.cost_matrix(h), T);
  });
  for (std::size_t h = 0; h < H; ++h) {
    if (stats.requested[h] > 0 && prior.hypotheses[h].cardinality() > 0) ++stats.ranked_assignment_calls;
  }

  // Distinct (track, measurement) posteriors, computed once each.
  std::map<std::pair<std::size_t, int>, std::size_t> post_index;
  std::vector<std::pair<std::size_t, int>> post_keys;
  for (std::size_t h = 0; h < H; ++h) {
    for (const auto& s : solutions[h]) {
      for (std::size_t i = 0; i < s.map.size(); ++i) {
        const std::pair<std::size_t, int> key{cache.row_index(h, i), s.map[i]};
        if (post_index.try_emplace(key, post_keys.size()).second) post_keys.push_back(key);
      }
    }
  }
  std::vector<TrackDensity> posts(post_keys.size());
  detail::parallel_for_index(post_keys.size(), cfg.threads, [&](std::size_t k) {
    const auto [r, j] = post_keys[k];
    const auto& row = cache.row(r);
    if (j == 0) {
      if (row.track->is_normalized(1e-12)) {
        posts[k] = row.track;
      } else {
        GaussianMixture p = *row.track;
        p.normalize();
        posts[k] = make_track(std::move(p));
      }
      return;
    }
    const auto jj = static_cast<std::size_t>(j - 1);
    auto d = row.innovation->detect(Z[jj], cache.kappa(jj));
    if (!d) throw NumericalError("ranked assignment selected a zero-likelihood detection");
    GaussianMixture p = std::move(d->second);
    if (p.size() > 1) p = prune_merge_mixture(p, cfg.mixture);
    posts[k] = make_track(std::move(p));
  });

  GlmbDensity pool;
  pool.time_index = prior.time_index;
  for (std::size_t h = 0; h < H; ++h) {
    const auto& parent = prior.hypotheses[h];
    for (const auto& s : solutions[h]) {
      double lw = parent.log_weight;
      std::vector<TrackDensity> tracks(parent.cardinality());
      for (std::size_t i = 0; i < s.map.size(); ++i) {
        const auto& row = cache.row(h, i);
        lw += s.map[i] == 0 ? row.log_eta_miss : row.log_eta_detect[static_cast<std::size_t>(s.map[i] - 1)];
        tracks[i] = posts[post_index.at({cache.row_index(h, i), s.map[i]})];
      }
      Hypothesis child;
      child.labels = parent.labels;
      child.log_weight = lw;
      child.tracks = std::move(tracks);
      child.provenance = Provenance{h, s.map, {}};
      pool.hypotheses.push_back(std::move(child));
    }
  }
  stats.children = pool.size();
  auto t = detail::truncate_pool(std::move(pool), cfg);
  stats.prune_error = std::max(0.0, 1.0 - t.kept_fraction);
  return {std::move(t.density), std::move(stats)};
}

inline GlmbDensity update_step(const GlmbDensity& prior, const MeasurementSet& Z, const LinearGaussianModel& model,
                               const FilterConfig& cfg) {
  return update_step_detailed(prior, Z, model, cfg).density;
}

// ---------------------------------------------------------------- prediction

struct PredictOverrides {
  std::optional<std::size_t> K;    // survivor subsets per hypothesis
  std::optional<std::size_t> K_B;  // birth subsets
};

struct PredictResult {
  GlmbDensity density;
  std::size_t birth_subsets = 0;
  std::size_t children = 0;
  double l1_error = 0.0;  // 1 - sum of kept unnormalized child weights
};

/// Cheapest birth subsets, stopping at the first prefix whose birth weights
/// reach `fraction` (or at `K_B` subsets when given).
inline std::vector<RankedSubset> select_birth_subsets(const LinearGaussianModel& model, std::uint32_t time,
                                                      double fraction, std::optional<std::size_t> K_B = {}) {
  const auto costs = birth_cost_vector(model, time);
  if (K_B) return k_shortest_subsets(costs, *K_B);
  const std::size_t n = model.birth.size();
  std::size_t K = 16;
  while (true) {
    auto all = k_shortest_subsets(costs, K);
    double covered = 0.0;
    for (std::size_t k = 0; k < all.size(); ++k) {
      covered += birth_weight(all[k].members, model);
      if (covered >= fraction * (1.0 - 1e-12)) {
        all.resize(k + 1);
        return all;
      }
    }
    if (n < 64 && all.size() == (std::size_t{1} << n)) return all;
    K *= 4;
  }
}

inline PredictResult predict_step_detailed(const GlmbDensity& posterior, const LinearGaussianModel& model,
                                           const FilterConfig& cfg, std::uint32_t birth_time,
                                           const PredictOverrides& over = {}) {
  if (posterior.hypotheses.empty()) throw InputError("predict_step: posterior density has no hypotheses");
  const std::size_t H = posterior.size();

  const auto births = select_birth_subsets(model, birth_time, cfg.birth_mass_fraction, over.K_B);
  const auto birth_labels = model.birth_labels(birth_time);
  std::vector<TrackDensity> birth_tracks;
  for (const auto& b : model.birth) birth_tracks.push_back(make_track(b.density));
  std::vector<double> birth_lw;
  for (const auto& s : births) birth_lw.push_back(log_birth_weight(s.members, model));

  // Predicted density of every distinct surviving track.
  std::unordered_map<const GaussianMixture*, std::size_t> seen;
  std::vector<std::pair<const GaussianMixture*, Label>> uniq;
  for (const auto& hyp : posterior.hypotheses) {
    for (std::size_t i = 0; i < hyp.cardinality(); ++i) {
      if (seen.try_emplace(hyp.tracks[i].get(), uniq.size()).second) uniq.emplace_back(hyp.tracks[i].get(), hyp.labels[i]);
    }
  }
  std::vector<TrackDensity> predicted(uniq.size());
  detail::parallel_for_index(uniq.size(), cfg.threads, [&](std::size_t k) {
    predicted[k] = make_track(predict_track(*uniq[k].first, model, uniq[k].second));
  });

  std::vector<std::vector<Hypothesis>> slots(H);
  detail::parallel_for_index(H, cfg.threads, [&](std::size_t h) {
    const auto& parent = posterior.hypotheses[h];
    const std::size_t n = parent.cardinality();
    std::vector<double> eta(n);
    double lw_all_die = parent.log_weight;
    for (std::size_t i = 0; i < n; ++i) {
      eta[i] = eta_survival(*parent.tracks[i], model, parent.labels[i]);
      lw_all_die += std::log1p(-eta[i]);
    }
    std::vector<RankedSubset> survivors;
    if (n == 0) {
      survivors.push_back({});
    } else {
      const std::size_t K = over.K.value_or(detail::weight_share(parent.weight(), cfg.j_max));
      survivors = k_shortest_subsets(survival_cost_vector(parent.labels, eta), K);
    }
    for (const auto& J : survivors) {
      // ln([eta]^J [1 - eta]^(I - J)) = ln [1 - eta]^I - total cost of J.
      const double lw_survive = lw_all_die - J.total_cost;
      for (std::size_t b = 0; b < births.size(); ++b) {
        std::vector<Label> labels;
        std::vector<TrackDensity> tracks;
        for (std::size_t i : J.members) {
          labels.push_back(parent.labels[i]);
          tracks.push_back(predicted[seen.at(parent.tracks[i].get())]);
        }
        for (std::size_t m : births[b].members) {
          labels.push_back(birth_labels[m]);
          tracks.push_back(birth_tracks[m]);
        }
        Hypothesis child(std::move(labels), lw_survive + birth_lw[b], std::move(tracks));
        child.provenance = Provenance{h, {}, births[b].labels};
        slots[h].push_back(std::move(child));
      }
    }
  });

  GlmbDensity pool;
  pool.time_index = birth_time;
  for (auto& s : slots) {
    for (auto& c : s) pool.hypotheses.push_back(std::move(c));
  }
  PredictResult out;
  out.birth_subsets = births.size();
  out.children = pool.size();
  auto t = detail::truncate_pool(std::move(pool), cfg);
  // The posterior is normalized, so the pooled weight is the share of the
  // full prediction that the K-shortest enumeration reached.
  out.l1_error = std::max(0.0, 1.0 - std::exp(t.total_log_weight) * t.kept_fraction);
  out.density = std::move(t.density);
  return out;
}

inline GlmbDensity predict_step(const GlmbDensity& posterior, const LinearGaussianModel& model,
                                const FilterConfig& cfg) {
  return predict_step_detailed(posterior, model, cfg, posterior.time_index + 1).density;
}

// ---------------------------------------------------------------- estimation

/// MAP cardinality, then the heaviest hypothesis of that cardinality.
inline StateEstimate estimate_state(const GlmbDensity& posterior, const FilterConfig& cfg) {
  StateEstimate est;
  est.time = posterior.time_index;
  const auto rho = cardinality_distribution(posterior, cfg.n_max);
  std::size_t n_hat = 0;
  for (std::size_t n = 1; n < rho.size(); ++n) {
    if (rho[n] > rho[n_hat]) n_hat = n;
  }
  const Hypothesis* best = nullptr;
  for (const auto& h : posterior.hypotheses) {
    if (h.cardinality() == n_hat && (!best || h.log_weight > best->log_weight)) best = &h;
  }
  if (!best) return est;
  for (std::size_t i = 0; i < best->cardinality(); ++i) est.tracks.emplace(best->labels[i], best->tracks[i]->mean());
  est.cardinality = est.tracks.size();
  return est;
}

// ---------------------------------------------------------------- main loop

struct StepDiagnostics {
  std::size_t step = 0;
  std::size_t predicted_hypotheses = 0;
  std::size_t hypotheses = 0;
  double l1_error = 0.0;
  double update_prune_error = 0.0;
  double ess = 0.0;
  std::size_t n_hat = 0;
  double expected_cardinality = 0.0;
  std::vector<double> cardinality_distribution;
  std::size_t ranked_assignment_calls = 0;
  double wall_ms = 0.0;
};

struct FilterResult {
  std::vector<StateEstimate> estimates;
  std::vector<StepDiagnostics> diagnostics;
  GlmbDensity final_density;
};

namespace detail {
template <class Fn>
auto with_step_context(std::size_t step, Fn&& fn) {
  const std::string prefix = "step " + std::to_string(step) + ": ";
  try {
    return fn();
  } catch (const InputError& e) {
    throw InputError(prefix + e.what());
  } catch (const DegenerateDensityError& e) {
    throw DegenerateDensityError(prefix + e.what());
  } catch (const InfiniteCostError& e) {
    throw InfiniteCostError(prefix + e.what());
  } catch (const NumericalError& e) {
    throw NumericalError(prefix + e.what());
  }
}
}  // namespace detail

/// Runs predict, update and estimate for scans[0..K). Scan k is time step k.
inline FilterResult run_filter(const std::vector<MeasurementSet>& scans, const LinearGaussianModel& model,
                               const FilterConfig& cfg, GlmbDensity initial = GlmbDensity::empty_prior()) {
  model.validate();
  cfg.validate();
  FilterResult out;
  GlmbDensity density = std::move(initial);
  for (std::size_t k = 0; k < scans.size(); ++k) {
    const auto t0 = std::chrono::steady_clock::now();
    StepDiagnostics d;
    d.step = k;
    detail::with_step_context(k, [&] {
      auto pred = predict_step_detailed(density, model, cfg, static_cast<std::uint32_t>(k));
      d.predicted_hypotheses = pred.density.size();
      d.l1_error = pred.l1_error;
      auto upd = update_step_detailed(pred.density, scans[k], model, cfg);
      d.update_prune_error = upd.stats.prune_error;
      d.ranked_assignment_calls = upd.stats.ranked_assignment_calls;
      density = std::move(upd.density);
      return 0;
    });
    auto est = estimate_state(density, cfg);
    d.hypotheses = density.size();
    d.ess = effective_sample_size(density);
    d.n_hat = est.cardinality;
    d.expected_cardinality = expected_cardinality(density);
    std::size_t n_top = 0;
    for (const auto& h : density.hypotheses) n_top = std::max(n_top, h.cardinality());
    d.cardinality_distribution = cardinality_distribution(density, std::min(n_top, cfg.n_max));
    d.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    out.estimates.push_back(std::move(est));
    out.diagnostics.push_back(std::move(d));
  }
  out.final_density = std::move(density);
  return out;
}

}  // namespace glmb
