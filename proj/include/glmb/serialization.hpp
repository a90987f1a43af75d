#pragma once

// JSON forms of scenarios, filter settings and densities. Every document
// carries a "schema" string with a version; readers reject other versions.
// The formats are described in docs/formats.md.

#include <Eigen/Dense>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>
#include <string>
#include <vector>

#include "glmb/error.hpp"
#include "glmb/filter.hpp"
#include "glmb/glmb_density.hpp"
#include "glmb/model.hpp"
#include "glmb/scenario.hpp"

namespace glmb::io {

using nlohmann::json;

inline constexpr const char* kScenarioSchema = "glmb.scenario/1";
inline constexpr const char* kDensitySchema = "glmb.density/1";
inline constexpr const char* kRunSchema = "glmb.run/1";

// ---------------------------------------------------------------- helpers

inline json to_json_vector(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

inline json to_json_matrix(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) rows.push_back(to_json_vector(m.row(i).transpose()));
  return rows;
}

inline Eigen::VectorXd vector_from_json(const json& j, const std::string& field) {
  if (!j.is_array()) throw InputError(field + " must be an array of numbers");
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw InputError(field + "[" + std::to_string(i) + "] must be a number");
    v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  }
  return v;
}

inline Eigen::MatrixXd matrix_from_json(const json& j, const std::string& field) {
  if (!j.is_array() || j.empty()) throw InputError(field + " must be a non-empty array of rows");
  const auto cols = static_cast<Eigen::Index>(j[0].size());
  Eigen::MatrixXd m(static_cast<Eigen::Index>(j.size()), cols);
  for (std::size_t i = 0; i < j.size(); ++i) {
    const auto r = vector_from_json(j[i], field + "[" + std::to_string(i) + "]");
    if (r.size() != cols) throw InputError(field + " has ragged rows");
    m.row(static_cast<Eigen::Index>(i)) = r.transpose();
  }
  return m;
}

template <class T>
T get_or(const json& j, const char* key, T fallback, const std::string& where) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw InputError(where + "." + key + " has the wrong type");
  }
}

inline void check_schema(const json& doc, const char* expected) {
  if (!doc.is_object() || !doc.contains("schema")) {
    throw InputError(std::string("document has no \"schema\" field; expected \"") + expected + "\"");
  }
  const auto s = doc["schema"].get<std::string>();
  if (s != expected) throw InputError("unsupported schema \"" + s + "\"; expected \"" + expected + "\"");
}

inline json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  try {
    return json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::parse_error& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------- mixtures

inline json mixture_to_json(const GaussianMixture& p) {
  json comps = json::array();
  for (const auto& c : p.components) {
    comps.push_back({{"weight", c.weight}, {"mean", to_json_vector(c.mean)}, {"cov", to_json_matrix(c.cov)}});
  }
  return comps;
}

inline GaussianMixture mixture_from_json(const json& j, const std::string& where) {
  if (!j.is_array()) throw InputError(where + " must be an array of components");
  GaussianMixture p;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string tag = where + "[" + std::to_string(i) + "]";
    const auto& c = j[i];
    GaussianComponent g;
    g.weight = get_or(c, "weight", 1.0, tag);
    if (!c.contains("mean")) throw InputError(tag + ".mean is missing");
    g.mean = vector_from_json(c["mean"], tag + ".mean");
    if (c.contains("cov")) {
      g.cov = matrix_from_json(c["cov"], tag + ".cov");
    } else if (c.contains("cov_diag")) {
      g.cov = vector_from_json(c["cov_diag"], tag + ".cov_diag").asDiagonal();
    } else {
      throw InputError(tag + " needs \"cov\" or \"cov_diag\"");
    }
    p.components.push_back(std::move(g));
  }
  return p;
}

// ---------------------------------------------------------------- model

/// Model constants. The motion and measurement matrices come either from
/// the constant-velocity parameters (dt, sigma_process, sigma_meas) or from
/// explicit F, Q, H, R entries, which take precedence.
inline LinearGaussianModel model_from_json(const json& j) {
  const std::string w = "model";
  if (!j.is_object()) throw InputError("model must be an object");
  LinearGaussianModel m = constant_velocity_model(get_or(j, "dt", 1.0, w), get_or(j, "sigma_process", 5.0, w),
                                                  get_or(j, "sigma_meas", 10.0, w));
  if (j.contains("F")) m.F = matrix_from_json(j["F"], "model.F");
  if (j.contains("Q")) m.Q = matrix_from_json(j["Q"], "model.Q");
  if (j.contains("H")) m.H = matrix_from_json(j["H"], "model.H");
  if (j.contains("R")) m.R = matrix_from_json(j["R"], "model.R");
  m.p_S = get_or(j, "p_S", 0.99, w);
  m.p_D = get_or(j, "p_D", 0.88, w);
  m.clutter.rate = get_or(j, "clutter_rate", 66.0, w);
  if (j.contains("region")) {
    const auto& r = j["region"];
    if (!r.is_array()) throw InputError("model.region must be a list of [lo, hi] pairs");
    m.clutter.region.lower.resize(static_cast<Eigen::Index>(r.size()));
    m.clutter.region.upper.resize(static_cast<Eigen::Index>(r.size()));
    for (std::size_t d = 0; d < r.size(); ++d) {
      const auto iv = vector_from_json(r[d], "model.region[" + std::to_string(d) + "]");
      if (iv.size() != 2) throw InputError("model.region entries must be [lo, hi] pairs");
      m.clutter.region.lower(static_cast<Eigen::Index>(d)) = iv(0);
      m.clutter.region.upper(static_cast<Eigen::Index>(d)) = iv(1);
    }
  } else {
    m.clutter.region = Region{Eigen::Vector2d(-1000.0, -1000.0), Eigen::Vector2d(1000.0, 1000.0)};
  }
  if (j.contains("birth")) {
    if (!j["birth"].is_array()) throw InputError("model.birth must be an array");
    for (std::size_t i = 0; i < j["birth"].size(); ++i) {
      const auto& b = j["birth"][i];
      const std::string tag = "model.birth[" + std::to_string(i) + "]";
      if (!b.contains("components")) throw InputError(tag + ".components is missing");
      m.birth.push_back({get_or(b, "r", 0.0, tag), mixture_from_json(b["components"], tag + ".components")});
    }
  }
  return m;
}

inline json model_to_json(const LinearGaussianModel& m) {
  json region = json::array();
  for (Eigen::Index d = 0; d < m.clutter.region.lower.size(); ++d) {
    region.push_back({m.clutter.region.lower(d), m.clutter.region.upper(d)});
  }
  json birth = json::array();
  for (const auto& b : m.birth) birth.push_back({{"r", b.existence}, {"components", mixture_to_json(b.density)}});
  return {{"F", to_json_matrix(m.F)},   {"Q", to_json_matrix(m.Q)},        {"H", to_json_matrix(m.H)},
          {"R", to_json_matrix(m.R)},   {"p_S", m.p_S},                    {"p_D", m.p_D},
          {"clutter_rate", m.clutter.rate}, {"region", region},            {"birth", birth}};
}

// ---------------------------------------------------------------- scenario

inline ScenarioSpec scenario_from_json(const json& doc) {
  check_schema(doc, kScenarioSchema);
  ScenarioSpec s;
  s.duration = get_or<std::size_t>(doc, "duration", 0, "scenario");
  s.seed = get_or<std::uint64_t>(doc, "seed", 0, "scenario");
  s.noisy_truth = get_or(doc, "noisy_truth", false, "scenario");
  if (!doc.contains("model")) throw InputError("scenario.model is missing");
  s.model = model_from_json(doc["model"]);
  if (doc.contains("tracks")) {
    for (std::size_t t = 0; t < doc["tracks"].size(); ++t) {
      const auto& r = doc["tracks"][t];
      const std::string tag = "scenario.tracks[" + std::to_string(t) + "]";
      if (!r.contains("state")) throw InputError(tag + ".state is missing");
      s.tracks.push_back({get_or<std::size_t>(r, "birth", 0, tag), get_or<std::size_t>(r, "death", 0, tag),
                          vector_from_json(r["state"], tag + ".state"), get_or<std::string>(r, "note", "", tag)});
    }
  }
  return s;
}

inline json scenario_to_json(const ScenarioSpec& s) {
  json tracks = json::array();
  for (const auto& t : s.tracks) {
    json r = {{"birth", t.birth}, {"death", t.death}, {"state", to_json_vector(t.initial)}};
    if (!t.note.empty()) r["note"] = t.note;
    tracks.push_back(r);
  }
  return {{"schema", kScenarioSchema}, {"duration", s.duration},       {"seed", s.seed},
          {"noisy_truth", s.noisy_truth}, {"model", model_to_json(s.model)}, {"tracks", tracks}};
}

inline ScenarioSpec load_scenario(const std::filesystem::path& path) { return scenario_from_json(read_json_file(path)); }

// ---------------------------------------------------------------- filter config

inline void apply_filter_json(FilterConfig& c, const json& j) {
  const std::string w = "filter";
  if (!j.is_object()) throw InputError("filter must be an object");
  c.j_max = get_or(j, "j_max", c.j_max, w);
  c.birth_mass_fraction = get_or(j, "birth_mass_fraction", c.birth_mass_fraction, w);
  c.lookahead_mass_fraction = get_or(j, "lookahead_mass_fraction", c.lookahead_mass_fraction, w);
  c.lookahead_enabled = get_or(j, "lookahead", c.lookahead_enabled, w);
  c.n_max = get_or(j, "n_max", c.n_max, w);
  c.weight_floor = get_or(j, "weight_floor", c.weight_floor, w);
  c.threads = get_or(j, "threads", c.threads, w);
  c.merge_identical = get_or(j, "merge_identical", c.merge_identical, w);
  if (j.contains("mixture")) {
    const auto& m = j["mixture"];
    c.mixture.weight_floor = get_or(m, "weight_floor", c.mixture.weight_floor, "filter.mixture");
    c.mixture.merge_distance = get_or(m, "merge_distance", c.mixture.merge_distance, "filter.mixture");
    c.mixture.max_components = get_or(m, "max_components", c.mixture.max_components, "filter.mixture");
  }
}

inline json filter_to_json(const FilterConfig& c) {
  return {{"j_max", c.j_max},
          {"birth_mass_fraction", c.birth_mass_fraction},
          {"lookahead_mass_fraction", c.lookahead_mass_fraction},
          {"lookahead", c.lookahead_enabled},
          {"n_max", c.n_max},
          {"weight_floor", c.weight_floor},
          {"threads", c.threads},
          {"merge_identical", c.merge_identical},
          {"mixture",
           {{"weight_floor", c.mixture.weight_floor},
            {"merge_distance", c.mixture.merge_distance},
            {"max_components", c.mixture.max_components}}}};
}

// ---------------------------------------------------------------- density

inline json density_to_json(const GlmbDensity& d) {
  json hyps = json::array();
  for (const auto& h : d.hypotheses) {
    json labels = json::array();
    json tracks = json::array();
    for (std::size_t i = 0; i < h.cardinality(); ++i) {
      labels.push_back({h.labels[i].birth_time, h.labels[i].index});
      tracks.push_back(mixture_to_json(*h.tracks[i]));
    }
    hyps.push_back({{"labels", labels}, {"log_weight", h.log_weight}, {"tracks", tracks}});
  }
  return {{"schema", kDensitySchema}, {"time_index", d.time_index}, {"hypotheses", hyps}};
}

inline GlmbDensity density_from_json(const json& doc) {
  check_schema(doc, kDensitySchema);
  GlmbDensity d;
  d.time_index = get_or<std::uint32_t>(doc, "time_index", 0, "density");
  for (std::size_t k = 0; k < doc.at("hypotheses").size(); ++k) {
    const auto& h = doc["hypotheses"][k];
    const std::string tag = "density.hypotheses[" + std::to_string(k) + "]";
    std::vector<Label> labels;
    std::vector<TrackDensity> tracks;
    for (const auto& l : h.at("labels")) labels.push_back({l.at(0).get<std::uint32_t>(), l.at(1).get<std::uint32_t>()});
    for (std::size_t i = 0; i < h.at("tracks").size(); ++i) {
      tracks.push_back(make_track(mixture_from_json(h["tracks"][i], tag + ".tracks[" + std::to_string(i) + "]")));
    }
    d.hypotheses.emplace_back(std::move(labels), h.at("log_weight").get<double>(), std::move(tracks));
  }
  return d;
}

}  // namespace glmb::io
