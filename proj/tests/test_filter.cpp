#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <numeric>

#include "glmb/filter.hpp"
#include "glmb/scenario.hpp"
#include "glmb/testing/brute_force.hpp"
#include "glmb/testing/instances.hpp"

using namespace glmb;
namespace oracle = glmb::testing;
using oracle::Rng;

namespace {

FilterConfig exhaustive_config() {
  FilterConfig cfg;
  cfg.j_max = 1000000;
  cfg.weight_floor = 0.0;
  cfg.lookahead_enabled = false;
  return cfg;
}

TrackDensity unit_track(double x, double y) {
  Eigen::VectorXd m(4);
  m << x, y, 0, 0;
  return make_track(GaussianMixture::single(m, 10.0 * Eigen::MatrixXd::Identity(4, 4)));
}

void add_births(LinearGaussianModel& m, Rng& rng, std::size_t n) {
  m.birth.clear();
  for (std::size_t b = 0; b < n; ++b) {
    m.birth.push_back({oracle::uniform(rng, 0.02, 0.6), oracle::random_mixture(rng, 4, oracle::uniform_index(rng, 1, 2), 5.0, 2.0)});
  }
}

// Matches predicted children to oracle children by (parent, label set).
struct PredictMatch {
  std::size_t matched = 0;
  double weight_deviation = 0.0;
  double kept_oracle_weight = 0.0;
};

PredictMatch match_prediction(const GlmbDensity& posterior, const LinearGaussianModel& model, const GlmbDensity& got,
                              std::uint32_t time, bool normalized) {
  const auto want = oracle::brute_force_predict(posterior, model);
  std::map<std::pair<std::size_t, std::vector<Label>>, double> oracle_weight;
  const auto birth_labels = model.birth_labels(time);
  for (const auto& c : want) {
    std::vector<Label> ls;
    for (std::size_t i : c.survivors) ls.push_back(posterior.hypotheses[c.parent].labels[i]);
    for (std::size_t b : c.births) ls.push_back(birth_labels[b]);
    std::sort(ls.begin(), ls.end());
    oracle_weight[{c.parent, ls}] = c.weight;
  }
  PredictMatch r;
  double kept = 0.0;
  for (const auto& h : got.hypotheses) {
    const auto it = oracle_weight.find({h.provenance->parent, h.labels});
    if (it == oracle_weight.end()) continue;
    ++r.matched;
    kept += it->second;
  }
  r.kept_oracle_weight = kept;
  for (const auto& h : got.hypotheses) {
    const auto it = oracle_weight.find({h.provenance->parent, h.labels});
    if (it == oracle_weight.end()) continue;
    const double w = normalized ? it->second / kept : it->second;
    r.weight_deviation = std::max(r.weight_deviation, oracle::relative_deviation(h.weight(), w));
  }
  return r;
}

void expect_normalized(const GlmbDensity& d) {
  double s = 0.0;
  for (const auto& h : d.hypotheses) {
    s += h.weight();
    for (const auto& t : h.tracks) EXPECT_TRUE(t->is_normalized(1e-9));
  }
  EXPECT_NEAR(s, 1.0, 1e-9);
}

}  // namespace

// ---------------------------------------------------------------- update

TEST(UpdateStep, EmptyLabelSetIsUnchanged) {
  Rng rng(1);
  const auto m = reference_model();
  const auto r = update_step_detailed(GlmbDensity::empty_prior(), oracle::random_scan(rng, 5, 500), m, FilterConfig{});
  ASSERT_EQ(r.density.size(), 1u);
  EXPECT_TRUE(r.density.hypotheses[0].labels.empty());
  EXPECT_NEAR(r.density.hypotheses[0].log_weight, 0.0, 1e-15);
  EXPECT_EQ(r.stats.ranked_assignment_calls, 0u);
}

TEST(UpdateStep, OneTrackOneMeasurementMatchesDirectEvaluation) {
  Rng rng(2);
  for (int rep = 0; rep < 20; ++rep) {
    const auto m = oracle::tiny_model(rng);
    GlmbDensity prior;
    prior.hypotheses.emplace_back(std::vector<Label>{{0, 1}}, 0.0,
                                  std::vector<TrackDensity>{make_track(oracle::random_mixture(rng, 4, 2, 5.0, 2.0))});
    const auto r = oracle::compare_update(prior, oracle::random_scan(rng, 1), m);
    EXPECT_TRUE(r.complete);
    EXPECT_EQ(r.children, 2u);
    EXPECT_LT(r.weight_deviation, 1e-9);
    EXPECT_LT(r.track_deviation, 1e-9);
  }
}

TEST(UpdateStep, TwoTracksTwoMeasurementsAllSevenMaps) {
  Rng rng(3);
  for (int rep = 0; rep < 20; ++rep) {
    const auto m = oracle::tiny_model(rng);
    GlmbDensity prior;
    prior.hypotheses.emplace_back(std::vector<Label>{{0, 1}, {0, 2}}, 0.0,
                                  std::vector<TrackDensity>{make_track(oracle::random_mixture(rng, 4, 1, 5.0, 2.0)),
                                                            make_track(oracle::random_mixture(rng, 4, 2, 5.0, 2.0))});
    const auto Z = oracle::random_scan(rng, 2);
    const auto r = oracle::compare_update(prior, Z, m);
    EXPECT_TRUE(r.complete);
    EXPECT_EQ(r.children, 7u);
    EXPECT_LT(r.weight_deviation, 1e-9);
    EXPECT_LT(r.track_deviation, 1e-9);

    // Ranked order: the oracle weights sorted descending give the same maps.
    auto cfg = exhaustive_config();
    const std::vector<std::size_t> T = {7};
    const auto got = update_step_detailed(prior, Z, m, cfg, T).density;
    auto want = oracle::brute_force_update(prior, Z, m);
    std::stable_sort(want.begin(), want.end(), [](const auto& a, const auto& b) { return a.weight > b.weight; });
    for (std::size_t k = 0; k < got.size(); ++k) EXPECT_NEAR(got.hypotheses[k].weight(), want[k].weight, 1e-9 * want[k].weight);
  }
}

TEST(UpdateStep, ExhaustiveRandomInstances) {
  Rng rng(4);
  for (int rep = 0; rep < 30; ++rep) {
    const auto m = oracle::tiny_model(rng);
    const auto prior = oracle::random_tiny_density(rng, 3, oracle::uniform_index(rng, 1, 3));
    const auto r = oracle::compare_update(prior, oracle::random_scan(rng, oracle::uniform_index(rng, 0, 3)), m);
    EXPECT_TRUE(r.complete);
    EXPECT_LT(r.weight_deviation, 1e-9);
    EXPECT_LT(r.track_deviation, 1e-9);
  }
}

TEST(UpdateStep, Errors) {
  const auto m = reference_model();
  EXPECT_THROW(update_step(GlmbDensity{}, {}, m, FilterConfig{}), InputError);
  const std::vector<std::size_t> T = {1, 1};
  EXPECT_THROW(update_step_detailed(GlmbDensity::empty_prior(), {}, m, FilterConfig{}, T), InputError);
}

TEST(UpdateStep, ChildrenOfAParentAreInRankedOrder) {
  Rng rng(5);
  const auto m = oracle::tiny_model(rng);
  for (int rep = 0; rep < 10; ++rep) {
    const auto prior = oracle::random_tiny_density(rng, 3, 3);
    FilterConfig cfg;
    cfg.j_max = 20;
    cfg.lookahead_enabled = false;
    const auto r = update_step_detailed(prior, oracle::random_scan(rng, 3), m, cfg);
    std::map<std::size_t, double> last;
    for (const auto& h : r.density.hypotheses) {
      const auto it = last.find(h.provenance->parent);
      if (it != last.end()) {
        EXPECT_LE(h.log_weight, it->second + 1e-12);
      }
      last[h.provenance->parent] = h.log_weight;
    }
    expect_normalized(r.density);
  }
}

TEST(UpdateStep, CapAndPruneError) {
  Rng rng(6);
  const auto m = oracle::tiny_model(rng);
  const auto prior = oracle::random_tiny_density(rng, 3, 2);
  const auto Z = oracle::random_scan(rng, 3);
  auto cfg = exhaustive_config();
  std::vector<std::size_t> T;
  for (const auto& h : prior.hypotheses) T.push_back(oracle::count_association_maps(h.cardinality(), Z.size()));
  const auto full = update_step_detailed(prior, Z, m, cfg, T);
  cfg.j_max = 5;
  const auto capped = update_step_detailed(prior, Z, m, cfg, T);
  ASSERT_EQ(capped.density.size(), 5u);
  auto w = full.density.weights();
  std::sort(w.rbegin(), w.rend());
  EXPECT_NEAR(capped.stats.prune_error, 1.0 - std::accumulate(w.begin(), w.begin() + 5, 0.0), 1e-12);
  expect_normalized(capped.density);
}

// ---------------------------------------------------------------- prediction

TEST(PredictStep, NearCertainSurvivalKeepsTheFullLabelSet) {
  Rng rng(7);
  auto m = oracle::tiny_model(rng);
  m.p_S = 0.9999;
  add_births(m, rng, 2);
  for (auto& b : m.birth) b.existence = 1e-12;
  const auto post = oracle::random_tiny_density(rng, 3, 3);
  const auto r = predict_step_detailed(post, m, exhaustive_config(), 1);
  std::map<std::size_t, const Hypothesis*> top;
  for (const auto& h : r.density.hypotheses) top.try_emplace(h.provenance->parent, &h);
  for (const auto& [parent, h] : top) {
    EXPECT_EQ(h->labels, post.hypotheses[parent].labels);
    EXPECT_NEAR(h->weight(), post.hypotheses[parent].weight(), 1e-3);
  }
}

TEST(PredictStep, TwoTracksOneBirthEightChildren) {
  auto m = reference_model();
  m.p_S = 0.9;
  m.birth.resize(1);
  GlmbDensity post;
  post.hypotheses.emplace_back(std::vector<Label>{{0, 1}, {0, 2}}, 0.0,
                               std::vector<TrackDensity>{unit_track(0, 0), unit_track(50, 50)});
  const auto r = predict_step_detailed(post, m, exhaustive_config(), 3, {4, 2});
  ASSERT_EQ(r.density.size(), 8u);
  const auto match = match_prediction(post, m, r.density, 3, false);
  EXPECT_EQ(match.matched, 8u);
  EXPECT_LT(match.weight_deviation, 1e-9);
  EXPECT_LT(r.l1_error, 1e-12);
}

TEST(PredictStep, TracksArePropagatedAndBirthsAdded) {
  auto m = reference_model();
  GlmbDensity post;
  post.hypotheses.emplace_back(std::vector<Label>{{0, 1}}, 0.0, std::vector<TrackDensity>{unit_track(10, 20)});
  const auto r = predict_step_detailed(post, m, exhaustive_config(), 5, {2, 8});
  for (const auto& h : r.density.hypotheses) {
    for (std::size_t i = 0; i < h.cardinality(); ++i) {
      const auto& c = h.tracks[i]->components[0];
      if (h.labels[i] == Label{0, 1}) {
        const auto& prior = post.hypotheses[0].tracks[0]->components[0];
        EXPECT_LT((c.mean - m.F * prior.mean).norm(), 1e-12);
        EXPECT_LT((c.cov - (m.F * prior.cov * m.F.transpose() + m.Q)).norm(), 1e-9);
      } else {
        EXPECT_EQ(h.labels[i].birth_time, 5u);
        EXPECT_LT(oracle::mixture_deviation(*h.tracks[i], m.birth[h.labels[i].index - 1].density), 1e-15);
      }
    }
  }
}

TEST(PredictStep, ExhaustiveRandomInstances) {
  Rng rng(8);
  for (int rep = 0; rep < 30; ++rep) {
    auto m = oracle::tiny_model(rng);
    add_births(m, rng, oracle::uniform_index(rng, 1, 2));
    const auto post = oracle::random_tiny_density(rng, 3, oracle::uniform_index(rng, 1, 3));
    const auto r = predict_step_detailed(post, m, exhaustive_config(), 1, {8, 4});
    const auto match = match_prediction(post, m, r.density, 1, false);
    EXPECT_EQ(match.matched, r.density.size());
    EXPECT_EQ(r.children, oracle::brute_force_predict(post, m).size());
    EXPECT_LT(match.weight_deviation, 1e-9);
    EXPECT_LT(r.l1_error, 1e-12);
    expect_normalized(r.density);
  }
}

TEST(PredictStep, ChildrenOfAParentSumToItsWeight) {
  Rng rng(9);
  for (int rep = 0; rep < 20; ++rep) {
    auto m = oracle::tiny_model(rng);
    add_births(m, rng, 2);
    const auto post = oracle::random_tiny_density(rng, 3, 3);
    const auto r = predict_step_detailed(post, m, exhaustive_config(), 1, {8, 4});
    std::vector<double> sums(post.size(), 0.0);
    for (const auto& h : r.density.hypotheses) sums[h.provenance->parent] += h.weight();
    for (std::size_t p = 0; p < post.size(); ++p) EXPECT_NEAR(sums[p], post.hypotheses[p].weight(), 1e-12);
  }
}

TEST(PredictStep, TruncationErrorIsTheDiscardedWeight) {
  Rng rng(10);
  for (int rep = 0; rep < 20; ++rep) {
    auto m = oracle::tiny_model(rng);
    add_births(m, rng, 2);
    const auto post = oracle::random_tiny_density(rng, 3, 3);
    auto cfg = exhaustive_config();
    const auto r = predict_step_detailed(post, m, cfg, 1, {2, 2});
    const auto match = match_prediction(post, m, r.density, 1, true);
    EXPECT_EQ(match.matched, r.density.size());
    EXPECT_NEAR(r.l1_error, 1.0 - match.kept_oracle_weight, 1e-12);
    EXPECT_LT(match.weight_deviation, 1e-9);
  }
}

TEST(PredictStep, BirthSubsetsReachTheRequestedMass) {
  const auto m = reference_model();
  const auto s = select_birth_subsets(m, 0, 0.99);
  double covered = 0.0;
  for (const auto& b : s) covered += birth_weight(b.members, m);
  EXPECT_GE(covered, 0.99 - 1e-12);
  covered -= birth_weight(s.back().members, m);
  EXPECT_LT(covered, 0.99);
  EXPECT_EQ(s.size(), 4u);
  EXPECT_EQ(select_birth_subsets(m, 0, 0.5, 6).size(), 6u);
}

// ---------------------------------------------------------------- look-ahead

namespace {
GlmbDensity dummy_prior(std::size_t n, bool with_empty = false) {
  GlmbDensity d;
  for (std::size_t h = 0; h < n; ++h) {
    if (with_empty && h == n - 1) {
      d.hypotheses.emplace_back(std::vector<Label>{}, std::log(1.0 / static_cast<double>(n)), std::vector<TrackDensity>{});
    } else {
      d.hypotheses.emplace_back(std::vector<Label>{{0, 1}}, std::log(1.0 / static_cast<double>(n)),
                                std::vector<TrackDensity>{unit_track(0, 0)});
    }
  }
  return d;
}
}  // namespace

TEST(Lookahead, SingleHypothesisGetsTheWholeBudget) {
  FilterConfig cfg;
  cfg.j_max = 77;
  const std::vector<double> mass = {0.4};
  EXPECT_EQ(detail::allocate_from_masses(dummy_prior(1), mass, cfg), (std::vector<std::size_t>{77}));
  Rng rng(11);
  const auto T = lookahead_allocate(dummy_prior(1), oracle::random_scan(rng, 3), reference_model(), cfg);
  EXPECT_EQ(T, (std::vector<std::size_t>{77}));
}

TEST(Lookahead, PrefixCoversTheFraction) {
  FilterConfig cfg;
  cfg.j_max = 1000;
  const std::vector<double> mass = {0.99, 0.01};
  EXPECT_EQ(detail::allocate_from_masses(dummy_prior(2), mass, cfg), (std::vector<std::size_t>{990, 0}));
}

TEST(Lookahead, EqualMassesSelectAll) {
  FilterConfig cfg;
  cfg.j_max = 1000;
  const std::vector<double> mass(10, 0.3);
  const auto T = detail::allocate_from_masses(dummy_prior(10), mass, cfg);
  EXPECT_EQ(T, std::vector<std::size_t>(10, 100));
}

TEST(Lookahead, ZeroMassFallsBackToWeights) {
  FilterConfig cfg;
  cfg.j_max = 10;
  const std::vector<double> mass(4, 0.0);
  EXPECT_EQ(detail::allocate_from_masses(dummy_prior(4), mass, cfg), std::vector<std::size_t>(4, 3));
}

TEST(Lookahead, EmptyLabelSetAlwaysExpanded) {
  FilterConfig cfg;
  cfg.j_max = 100;
  const std::vector<double> mass = {1.0, 1.0, 0.0};
  EXPECT_EQ(detail::allocate_from_masses(dummy_prior(3, true), mass, cfg), (std::vector<std::size_t>{50, 50, 1}));
}

TEST(Lookahead, UnselectedHypothesesProduceNoChildren) {
  Rng rng(12);
  const auto m = reference_model();
  GlmbDensity prior;
  prior.hypotheses.emplace_back(std::vector<Label>{{0, 1}}, std::log(0.999), std::vector<TrackDensity>{unit_track(0, 0)});
  prior.hypotheses.emplace_back(std::vector<Label>{{0, 2}}, std::log(0.001), std::vector<TrackDensity>{unit_track(900, 900)});
  FilterConfig cfg;
  cfg.j_max = 10;
  const auto r = update_step_detailed(prior, {Eigen::Vector2d(1, 1)}, m, cfg);
  EXPECT_EQ(r.stats.requested[1], 0u);
  for (const auto& h : r.density.hypotheses) EXPECT_EQ(h.provenance->parent, 0u);
}

// ---------------------------------------------------------------- estimation

TEST(Estimate, SingleHypothesisReportsBothTracks) {
  GlmbDensity d;
  d.hypotheses.emplace_back(std::vector<Label>{{0, 1}, {0, 2}}, 0.0, std::vector<TrackDensity>{unit_track(1, 2), unit_track(3, 4)});
  const auto e = estimate_state(d, FilterConfig{});
  EXPECT_EQ(e.cardinality, 2u);
  EXPECT_EQ(e.tracks.at({0, 1})(0), 1.0);
  EXPECT_EQ(e.tracks.at({0, 2})(1), 4.0);
}

TEST(Estimate, MapCardinalityThenBestHypothesis) {
  GlmbDensity d;
  d.hypotheses.emplace_back(std::vector<Label>{{0, 1}}, std::log(0.3), std::vector<TrackDensity>{unit_track(0, 0)});
  d.hypotheses.emplace_back(std::vector<Label>{{0, 1}, {0, 2}}, std::log(0.3), std::vector<TrackDensity>{unit_track(0, 0), unit_track(1, 1)});
  d.hypotheses.emplace_back(std::vector<Label>{{0, 1}, {0, 3}}, std::log(0.4), std::vector<TrackDensity>{unit_track(0, 0), unit_track(2, 2)});
  const auto e = estimate_state(d, FilterConfig{});
  EXPECT_EQ(e.cardinality, 2u);
  EXPECT_TRUE(e.tracks.count({0, 3}));
}

TEST(Estimate, TiesGoToTheSmallerCardinality) {
  GlmbDensity d;
  d.hypotheses.emplace_back(std::vector<Label>{{0, 1}}, std::log(0.5), std::vector<TrackDensity>{unit_track(0, 0)});
  d.hypotheses.emplace_back(std::vector<Label>{{0, 1}, {0, 2}}, std::log(0.5), std::vector<TrackDensity>{unit_track(0, 0), unit_track(1, 1)});
  EXPECT_EQ(estimate_state(d, FilterConfig{}).cardinality, 1u);
}

TEST(Estimate, MixtureMeanIsWeighted) {
  GaussianMixture p({{0.25, Eigen::Vector4d(0, 0, 0, 0), Eigen::MatrixXd::Identity(4, 4)},
                     {0.75, Eigen::Vector4d(4, 8, 0, 0), Eigen::MatrixXd::Identity(4, 4)}});
  GlmbDensity d;
  d.hypotheses.emplace_back(std::vector<Label>{{0, 1}}, 0.0, std::vector<TrackDensity>{make_track(p)});
  const auto e = estimate_state(d, FilterConfig{});
  EXPECT_NEAR(e.tracks.at({0, 1})(0), 3.0, 1e-15);
  EXPECT_NEAR(e.tracks.at({0, 1})(1), 6.0, 1e-15);
}

// ---------------------------------------------------------------- main loop

namespace {
ScenarioSpec single_target(std::size_t duration) {
  ScenarioSpec s;
  s.duration = duration;
  s.model = reference_model();
  s.model.p_D = 0.98;
  s.model.clutter.rate = 0.01;
  s.model.birth.resize(1);
  s.model.birth[0].density.components[0].mean.setZero();
  Eigen::VectorXd x(4);
  x << 0, 0, 10, 5;
  s.tracks.push_back({0, duration, x, ""});
  return s;
}

ScenarioSpec reference_prefix(std::size_t duration) {
  auto spec = reference_scenario();
  spec.duration = duration;
  std::vector<TruthTrack> kept;
  for (auto t : spec.tracks) {
    if (t.birth >= duration) continue;
    t.death = std::min(t.death, duration);
    kept.push_back(t);
  }
  spec.tracks = kept;
  return spec;
}

FilterConfig small_config() {
  FilterConfig cfg;
  cfg.j_max = 200;
  return cfg;
}
}  // namespace

TEST(RunFilter, NoMeasurementsNoBirthsGivesEmptyEstimates) {
  auto m = reference_model();
  for (auto& b : m.birth) b.existence = 1e-300;
  const auto r = run_filter(std::vector<MeasurementSet>(10), m, small_config());
  ASSERT_EQ(r.estimates.size(), 10u);
  for (const auto& e : r.estimates) EXPECT_EQ(e.cardinality, 0u);
}

TEST(RunFilter, SingleTargetConfirmedWithinThreeSteps) {
  const auto spec = single_target(20);
  const auto scans = generate_measurements(generate_truth(spec), spec.model, 7);
  const auto r = run_filter(scans, spec.model, small_config());
  for (std::size_t k = 3; k < 20; ++k) EXPECT_EQ(r.estimates[k].cardinality, 1u) << "step " << k;
  for (const auto& d : r.diagnostics) {
    EXPECT_TRUE(std::isfinite(d.l1_error));
    EXPECT_GE(d.l1_error, 0.0);
    EXPECT_NEAR(std::accumulate(d.cardinality_distribution.begin(), d.cardinality_distribution.end(), 0.0), 1.0, 1e-9);
  }
  expect_normalized(r.final_density);
}

TEST(RunFilter, StepErrorsCarryTheStepIndex) {
  const auto spec = single_target(5);
  auto scans = generate_measurements(generate_truth(spec), spec.model, 1);
  scans[3].push_back(Eigen::VectorXd::Zero(3));
  try {
    run_filter(scans, spec.model, small_config());
    FAIL() << "expected InputError";
  } catch (const InputError& e) {
    EXPECT_EQ(std::string(e.what()).rfind("step 3: ", 0), 0u) << e.what();
  }
}

TEST(RunFilter, InvalidConfigurationRejected) {
  auto cfg = small_config();
  cfg.j_max = 0;
  EXPECT_THROW(run_filter({}, reference_model(), cfg), InputError);
  cfg = small_config();
  cfg.lookahead_mass_fraction = 1.5;
  EXPECT_THROW(run_filter({}, reference_model(), cfg), InputError);
}

TEST(RunFilterProperty, EveryStepIsNormalized) {
  auto spec = reference_prefix(15);
  const auto scans = generate_measurements(generate_truth(spec), spec.model, 3);
  auto density = GlmbDensity::empty_prior();
  const auto cfg = small_config();
  for (std::size_t k = 0; k < scans.size(); ++k) {
    density = predict_step_detailed(density, spec.model, cfg, static_cast<std::uint32_t>(k)).density;
    expect_normalized(density);
    density = update_step(density, scans[k], spec.model, cfg);
    expect_normalized(density);
  }
}

TEST(RunFilterProperty, LookaheadAgreesWithPlainAllocationOnLowClutter) {
  auto spec = reference_prefix(40);
  spec.model.clutter.rate = 5.0;
  const auto scans = generate_measurements(generate_truth(spec), spec.model, 11);
  auto cfg = small_config();
  const auto on = run_filter(scans, spec.model, cfg);
  cfg.lookahead_enabled = false;
  const auto off = run_filter(scans, spec.model, cfg);
  std::size_t agree = 0;
  for (std::size_t k = 0; k < scans.size(); ++k) agree += on.estimates[k].cardinality == off.estimates[k].cardinality;
  EXPECT_GE(static_cast<double>(agree), 0.95 * static_cast<double>(scans.size()));
}

TEST(RunFilterProperty, DeterministicAcrossRunsAndThreadCounts) {
  auto spec = reference_prefix(25);
  const auto scans = generate_measurements(generate_truth(spec), spec.model, 5);
  auto cfg = small_config();
  const auto a = run_filter(scans, spec.model, cfg);
  const auto b = run_filter(scans, spec.model, cfg);
  cfg.threads = 4;
  const auto c = run_filter(scans, spec.model, cfg);
  for (std::size_t k = 0; k < scans.size(); ++k) {
    EXPECT_EQ(a.diagnostics[k].hypotheses, b.diagnostics[k].hypotheses);
    EXPECT_EQ(a.diagnostics[k].l1_error, b.diagnostics[k].l1_error);
    EXPECT_EQ(a.diagnostics[k].ess, b.diagnostics[k].ess);
    EXPECT_EQ(a.diagnostics[k].cardinality_distribution, c.diagnostics[k].cardinality_distribution);
    ASSERT_EQ(a.estimates[k].tracks.size(), c.estimates[k].tracks.size());
    for (const auto& [label, x] : a.estimates[k].tracks) {
      ASSERT_TRUE(c.estimates[k].tracks.count(label));
      EXPECT_EQ(x, c.estimates[k].tracks.at(label));
    }
  }
}
