#pragma once

// Command implementations behind the `glmb` executable: Monte Carlo runs,
// configuration checks and the brute-force oracle comparisons.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iomanip>
#include <nlohmann/json.hpp>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "glmb/error.hpp"
#include "glmb/filter.hpp"
#include "glmb/io.hpp"
#include "glmb/ospa.hpp"
#include "glmb/scenario.hpp"
#include "glmb/serialization.hpp"
#include "glmb/testing/instances.hpp"

namespace glmb::app {

using nlohmann::json;

enum ExitCode : int { kOk = 0, kConfigError = 1, kTrialFailure = 2 };

struct EmitFlags {
  bool estimates = true;
  bool diagnostics = true;
  bool ospa = true;
  bool truth = true;
  bool measurements = true;
};

/// Values given on the command line; each one replaces the file value.
struct Overrides {
  std::optional<std::size_t> trials;
  std::optional<std::uint64_t> seed;
  std::optional<std::filesystem::path> out;
  std::optional<std::size_t> j_max;
  std::optional<unsigned> threads;
  bool no_lookahead = false;
  std::optional<double> p_D, p_S, clutter_rate, sigma_process, sigma_meas, birth_r;
};

struct RunConfig {
  std::filesystem::path scenario_path;
  ScenarioSpec scenario;
  FilterConfig filter;
  std::size_t trials = 1;
  std::uint64_t seed = 0;
  std::filesystem::path out_dir = "results";
  EmitFlags emit;
  double ospa_c = 100.0;
  double ospa_p = 1.0;

  std::vector<std::string> problems() const {
    auto out = scenario.problems();
    for (auto& p : filter.problems()) out.push_back(std::move(p));
    if (trials < 1) out.push_back("run.trials must be at least 1");
    if (!(ospa_c > 0.0)) out.push_back("run.ospa.c must be positive");
    if (!(ospa_p >= 1.0)) out.push_back("run.ospa.p must be at least 1");
    return out;
  }
};

inline void apply_model_overrides(json& model, const Overrides& o) {
  if (o.p_D) model["p_D"] = *o.p_D;
  if (o.p_S) model["p_S"] = *o.p_S;
  if (o.clutter_rate) model["clutter_rate"] = *o.clutter_rate;
  if (o.sigma_process) {
    model["sigma_process"] = *o.sigma_process;
    model.erase("Q");
  }
  if (o.sigma_meas) {
    model["sigma_meas"] = *o.sigma_meas;
    model.erase("R");
  }
  if (o.birth_r && model.contains("birth")) {
    for (auto& b : model["birth"]) b["r"] = *o.birth_r;
  }
}

/// Reads a run configuration. Precedence: command-line override, then the
/// file, then the built-in default.
inline RunConfig load_run_config(const std::filesystem::path& path, const Overrides& o = {}) {
  const json doc = io::read_json_file(path);
  io::check_schema(doc, io::kRunSchema);
  RunConfig rc;
  const auto dir = path.parent_path();
  if (!doc.contains("scenario")) throw InputError("run.scenario is missing");
  rc.scenario_path = dir / doc["scenario"].get<std::string>();
  json scenario = io::read_json_file(rc.scenario_path);
  if (scenario.contains("model")) apply_model_overrides(scenario["model"], o);
  rc.scenario = io::scenario_from_json(scenario);
  if (doc.contains("filter")) io::apply_filter_json(rc.filter, doc["filter"]);
  rc.trials = io::get_or<std::size_t>(doc, "trials", 1, "run");
  rc.seed = io::get_or<std::uint64_t>(doc, "seed", 0, "run");
  if (doc.contains("out")) rc.out_dir = dir / doc["out"].get<std::string>();
  if (doc.contains("ospa")) {
    rc.ospa_c = io::get_or(doc["ospa"], "c", rc.ospa_c, "run.ospa");
    rc.ospa_p = io::get_or(doc["ospa"], "p", rc.ospa_p, "run.ospa");
  }
  if (doc.contains("emit")) {
    const auto& e = doc["emit"];
    rc.emit.estimates = io::get_or(e, "estimates", true, "run.emit");
    rc.emit.diagnostics = io::get_or(e, "diagnostics", true, "run.emit");
    rc.emit.ospa = io::get_or(e, "ospa", true, "run.emit");
    rc.emit.truth = io::get_or(e, "truth", true, "run.emit");
    rc.emit.measurements = io::get_or(e, "measurements", true, "run.emit");
  }
  if (o.trials) rc.trials = *o.trials;
  if (o.seed) rc.seed = *o.seed;
  if (o.out) rc.out_dir = *o.out;
  if (o.j_max) rc.filter.j_max = *o.j_max;
  if (o.threads) rc.filter.threads = *o.threads;
  if (o.no_lookahead) rc.filter.lookahead_enabled = false;
  return rc;
}

// ---------------------------------------------------------------- trials

struct TrialResult {
  Truth truth;
  std::vector<MeasurementSet> scans;
  FilterResult filter;
  std::vector<OspaResult> ospa;
};

inline std::vector<Eigen::VectorXd> truth_states(const std::vector<TruthState>& s) {
  std::vector<Eigen::VectorXd> out;
  for (const auto& t : s) out.push_back(t.state);
  return out;
}

inline std::vector<Eigen::VectorXd> estimate_states(const StateEstimate& e) {
  std::vector<Eigen::VectorXd> out;
  for (const auto& [l, x] : e.tracks) out.push_back(x);
  return out;
}

/// One Monte Carlo trial: truth, scans drawn with `seed`, the filter and OSPA.
inline TrialResult run_trial(const ScenarioSpec& scenario, const FilterConfig& cfg, std::uint64_t seed,
                             double ospa_c = 100.0, double ospa_p = 1.0) {
  TrialResult r;
  r.truth = generate_truth(scenario);
  r.scans = generate_measurements(r.truth, scenario.model, seed);
  r.filter = run_filter(r.scans, scenario.model, cfg);
  for (std::size_t k = 0; k < r.truth.size(); ++k) {
    r.ospa.push_back(ospa(estimate_states(r.filter.estimates[k]), truth_states(r.truth[k]), ospa_c, ospa_p));
  }
  return r;
}

inline io::CsvWriter estimates_csv(const FilterResult& f) {
  io::CsvWriter w("glmb.estimates/1", {"step", "label_birth", "label_index", "x", "y", "vx", "vy"});
  for (std::size_t k = 0; k < f.estimates.size(); ++k) {
    for (const auto& [l, x] : f.estimates[k].tracks) {
      w.row(k, l.birth_time, l.index, x(0), x(1), x.size() > 2 ? x(2) : 0.0, x.size() > 3 ? x(3) : 0.0);
    }
  }
  return w;
}

inline io::CsvWriter diagnostics_csv(const FilterResult& f) {
  io::CsvWriter w("glmb.diagnostics/1", {"step", "predicted_hypotheses", "hypotheses", "l1_error",
                                         "update_prune_error", "ess", "n_hat", "expected_cardinality",
                                         "ranked_assignment_calls", "wall_ms"});
  for (const auto& d : f.diagnostics) {
    w.row(d.step, d.predicted_hypotheses, d.hypotheses, d.l1_error, d.update_prune_error, d.ess, d.n_hat,
          d.expected_cardinality, d.ranked_assignment_calls, d.wall_ms);
  }
  return w;
}

inline std::string diagnostics_jsonl(const FilterResult& f) {
  std::string out = json{{"schema", "glmb.diagnostics/1"}}.dump() + "\n";
  for (const auto& d : f.diagnostics) {
    out += json{{"step", d.step},
                {"predicted_hypotheses", d.predicted_hypotheses},
                {"hypotheses", d.hypotheses},
                {"l1_error", d.l1_error},
                {"update_prune_error", d.update_prune_error},
                {"ess", d.ess},
                {"n_hat", d.n_hat},
                {"expected_cardinality", d.expected_cardinality},
                {"cardinality_distribution", d.cardinality_distribution},
                {"ranked_assignment_calls", d.ranked_assignment_calls},
                {"wall_ms", d.wall_ms}}
               .dump() +
           "\n";
  }
  return out;
}

inline io::CsvWriter ospa_csv(const std::vector<OspaResult>& o) {
  io::CsvWriter w("glmb.ospa/1", {"step", "total", "loc", "card"});
  for (std::size_t k = 0; k < o.size(); ++k) w.row(k, o[k].total, o[k].localization, o[k].cardinality);
  return w;
}

inline io::CsvWriter truth_csv(const Truth& truth) {
  io::CsvWriter w("glmb.truth/1", {"step", "track", "x", "y", "vx", "vy"});
  for (std::size_t k = 0; k < truth.size(); ++k) {
    for (const auto& t : truth[k]) {
      const auto& x = t.state;
      w.row(k, t.track, x(0), x(1), x.size() > 2 ? x(2) : 0.0, x.size() > 3 ? x(3) : 0.0);
    }
  }
  return w;
}

inline io::CsvWriter measurements_csv(const std::vector<MeasurementSet>& scans) {
  io::CsvWriter w("glmb.measurements/1", {"step", "x", "y"});
  for (std::size_t k = 0; k < scans.size(); ++k) {
    for (const auto& z : scans[k]) w.row(k, z(0), z.size() > 1 ? z(1) : 0.0);
  }
  return w;
}

inline std::string trial_dir_name(std::size_t t) {
  std::ostringstream os;
  os << "trial_" << std::setw(3) << std::setfill('0') << t;
  return os.str();
}

struct TrialSummary {
  bool ok = false;
  std::string error;
  std::vector<std::size_t> n_hat;
  std::vector<OspaResult> ospa;
  std::size_t ranked_assignment_calls = 0;
  bool l1_finite = true;
};

inline json aggregate_json(const RunConfig& rc, const std::vector<TrialSummary>& trials) {
  const auto truth_n = true_cardinality(generate_truth(rc.scenario));
  const std::size_t K = truth_n.size();
  json steps = json::array();
  double ospa_sum = 0.0;
  std::size_t ok = 0;
  for (const auto& t : trials) ok += t.ok ? 1 : 0;
  for (std::size_t k = 0; k < K; ++k) {
    double s = 0.0, s2 = 0.0, o = 0.0, ol = 0.0, oc = 0.0;
    for (const auto& t : trials) {
      if (!t.ok) continue;
      const auto n = static_cast<double>(t.n_hat[k]);
      s += n;
      s2 += n * n;
      o += t.ospa[k].total;
      ol += t.ospa[k].localization;
      oc += t.ospa[k].cardinality;
    }
    const double N = std::max<double>(1.0, static_cast<double>(ok));
    const double mean = s / N;
    steps.push_back({{"step", k},
                     {"true_cardinality", truth_n[k]},
                     {"mean_cardinality", mean},
                     {"std_cardinality", std::sqrt(std::max(0.0, s2 / N - mean * mean))},
                     {"mean_ospa", o / N},
                     {"mean_ospa_loc", ol / N},
                     {"mean_ospa_card", oc / N}});
    ospa_sum += o / N;
  }
  json failed = json::array();
  std::size_t calls = 0;
  for (std::size_t t = 0; t < trials.size(); ++t) {
    calls += trials[t].ranked_assignment_calls;
    if (!trials[t].ok) failed.push_back({{"trial", t}, {"error", trials[t].error}});
  }
  return {{"schema", "glmb.aggregate/1"},
          {"trials", trials.size()},
          {"succeeded", ok},
          {"base_seed", rc.seed},
          {"filter", io::filter_to_json(rc.filter)},
          {"time_averaged_ospa", K ? ospa_sum / static_cast<double>(K) : 0.0},
          {"ranked_assignment_calls", calls},
          {"failed", failed},
          {"steps", steps}};
}

/// Runs every trial (seed = base + t), writes per-trial files and
/// aggregate.json. A failed trial is recorded and the batch continues.
inline int cmd_run(const RunConfig& rc, std::ostream& log) {
  if (auto p = rc.problems(); !p.empty()) {
    for (const auto& s : p) log << "config error: " << s << "\n";
    return kConfigError;
  }
  std::vector<TrialSummary> summaries(rc.trials);
  detail::parallel_for_index(rc.trials, rc.filter.threads, [&](std::size_t t) {
    auto& s = summaries[t];
    try {
      const auto r = run_trial(rc.scenario, rc.filter, rc.seed + t, rc.ospa_c, rc.ospa_p);
      const auto dir = rc.out_dir / trial_dir_name(t);
      if (rc.emit.estimates) estimates_csv(r.filter).save(dir / "estimates.csv");
      if (rc.emit.diagnostics) {
        diagnostics_csv(r.filter).save(dir / "diagnostics.csv");
        io::write_atomic(dir / "diagnostics.jsonl", diagnostics_jsonl(r.filter));
      }
      if (rc.emit.ospa) ospa_csv(r.ospa).save(dir / "ospa.csv");
      if (rc.emit.truth) truth_csv(r.truth).save(dir / "truth.csv");
      if (rc.emit.measurements) measurements_csv(r.scans).save(dir / "measurements.csv");
      for (const auto& e : r.filter.estimates) s.n_hat.push_back(e.cardinality);
      for (const auto& d : r.filter.diagnostics) {
        s.ranked_assignment_calls += d.ranked_assignment_calls;
        s.l1_finite = s.l1_finite && std::isfinite(d.l1_error);
      }
      s.ospa = r.ospa;
      s.ok = true;
    } catch (const std::exception& e) {
      s.error = e.what();
    }
  });
  bool all_ok = true;
  for (std::size_t t = 0; t < summaries.size(); ++t) {
    if (!summaries[t].ok) {
      all_ok = false;
      log << "trial " << t << " failed: " << summaries[t].error << "\n";
    }
  }
  io::write_atomic(rc.out_dir / "aggregate.json", aggregate_json(rc, summaries).dump(2) + "\n");
  return all_ok ? kOk : kTrialFailure;
}

// ---------------------------------------------------------------- validate

/// Checks the run configuration and prints the resolved model.
inline int cmd_validate(const std::filesystem::path& path, const Overrides& o, std::ostream& out) {
  RunConfig rc;
  try {
    rc = load_run_config(path, o);
  } catch (const std::exception& e) {
    out << "invalid: " << e.what() << "\n";
    return kConfigError;
  }
  const auto problems = rc.problems();
  if (!problems.empty()) {
    out << "invalid configuration (" << problems.size() << " problem" << (problems.size() > 1 ? "s" : "") << "):\n";
    for (const auto& p : problems) out << "  - " << p << "\n";
    return kConfigError;
  }
  const auto& m = rc.scenario.model;
  out << "configuration ok\n";
  out << "scenario: " << rc.scenario_path.string() << " (" << rc.scenario.duration << " steps, "
      << rc.scenario.tracks.size() << " tracks)\n";
  out << "p_S = " << m.p_S << ", p_D = " << m.p_D << "\n";
  out << "clutter: " << m.clutter.rate << " per scan over volume " << m.clutter.region.volume()
      << ", intensity " << m.clutter.rate / m.clutter.region.volume() << "\n";
  out << "birth terms: " << m.birth.size() << "\n";
  out << "model: " << io::model_to_json(m).dump() << "\n";
  out << "filter: " << io::filter_to_json(rc.filter).dump() << "\n";
  out << "trials = " << rc.trials << ", seed = " << rc.seed << ", out = " << rc.out_dir.string() << "\n";
  return kOk;
}

// ---------------------------------------------------------------- oracle

struct OracleSize {
  std::size_t a = 0;
  std::size_t b = 0;
};

/// Parses "N" or "AxB".
inline OracleSize parse_size(const std::string& s) {
  const auto x = s.find('x');
  try {
    if (x == std::string::npos) return {std::stoul(s), 0};
    return {std::stoul(s.substr(0, x)), std::stoul(s.substr(x + 1))};
  } catch (const std::exception&) {
    throw InputError("size must look like N or AxB, got \"" + s + "\"");
  }
}

inline constexpr std::size_t kOracleMaxAssign = 6;
inline constexpr std::size_t kOracleMaxSubsets = 16;
inline constexpr std::size_t kOracleMaxUpdate = 3;

/// Compares a library routine against its brute-force reference on `seeds`
/// random instances. Returns 0 on PASS, 2 on FAIL, 1 if the size is refused.
inline int cmd_oracle(const std::string& kind, const std::string& size, std::size_t seeds, std::ostream& out) {
  OracleSize sz;
  try {
    sz = parse_size(size);
  } catch (const InputError& e) {
    out << e.what() << "\n";
    return kConfigError;
  }
  std::size_t failures = 0;
  double max_dev = 0.0;
  if (kind == "assign") {
    const std::size_t rows = sz.a, cols = sz.b ? sz.b : sz.a;
    if (rows > kOracleMaxAssign || cols > kOracleMaxAssign) {
      out << "refused: assignment oracle enumerates every map; sizes up to " << kOracleMaxAssign << "x"
          << kOracleMaxAssign << " are supported\n";
      return kConfigError;
    }
    for (std::size_t s = 0; s < seeds; ++s) {
      testing::Rng rng(s);
      const auto C = testing::random_cost_matrix(rng, rows, cols);
      const auto want = testing::brute_force_ranked(C);
      const auto got = ranked_assignments(C, want.size());
      bool ok = got.size() == want.size();
      for (std::size_t i = 0; ok && i < got.size(); ++i) {
        ok = got[i].map == want[i].map;
        max_dev = std::max(max_dev, std::abs(got[i].cost - want[i].cost));
        ok = ok && std::abs(got[i].cost - want[i].cost) <= 1e-12;
      }
      failures += ok ? 0 : 1;
    }
  } else if (kind == "ksp") {
    if (sz.a > kOracleMaxSubsets) {
      out << "refused: subset oracle enumerates 2^n subsets; n up to " << kOracleMaxSubsets << " is supported\n";
      return kConfigError;
    }
    for (std::size_t s = 0; s < seeds; ++s) {
      testing::Rng rng(s);
      const auto nodes = testing::random_node_costs(rng, sz.a);
      const auto want = testing::brute_force_subsets(nodes);
      const auto got = k_shortest_subsets(nodes, want.size());
      bool ok = got.size() == want.size();
      for (std::size_t i = 0; ok && i < got.size(); ++i) {
        ok = got[i].labels == want[i].labels;
        max_dev = std::max(max_dev, std::abs(got[i].total_cost - want[i].cost));
        ok = ok && std::abs(got[i].total_cost - want[i].cost) <= 1e-12;
      }
      failures += ok ? 0 : 1;
    }
  } else if (kind == "update") {
    const std::size_t tracks = sz.a, meas = sz.b ? sz.b : sz.a;
    if (tracks > kOracleMaxUpdate || meas > kOracleMaxUpdate) {
      out << "refused: update oracle sizes up to " << kOracleMaxUpdate << "x" << kOracleMaxUpdate
          << " tracks x measurements are supported\n";
      return kConfigError;
    }
    for (std::size_t s = 0; s < seeds; ++s) {
      testing::Rng rng(s);
      const auto model = testing::tiny_model(rng);
      GlmbDensity prior;
      std::vector<Label> labels;
      std::vector<TrackDensity> ts;
      for (std::size_t i = 0; i < tracks; ++i) {
        labels.push_back({0, static_cast<std::uint32_t>(i + 1)});
        ts.push_back(make_track(testing::random_mixture(rng, 4, testing::uniform_index(rng, 1, 2), 5.0, 2.0)));
      }
      prior.hypotheses.emplace_back(std::move(labels), 0.0, std::move(ts));
      const auto Z = testing::random_scan(rng, meas);
      const auto r = testing::compare_update(prior, Z, model);
      const double dev = std::max(r.weight_deviation, r.track_deviation);
      max_dev = std::max(max_dev, dev);
      failures += (r.complete && dev <= 1e-9) ? 0 : 1;
    }
  } else {
    out << "unknown oracle \"" << kind << "\"; expected assign, ksp or update\n";
    return kConfigError;
  }
  out << (failures == 0 ? "PASS" : "FAIL") << " oracle=" << kind << " size=" << size << " seeds=" << seeds
      << " failures=" << failures << " max_deviation=" << max_dev << "\n";
  return failures == 0 ? kOk : kTrialFailure;
}

}  // namespace glmb::app
