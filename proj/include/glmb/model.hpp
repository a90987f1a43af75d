#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "glmb/error.hpp"
#include "glmb/gaussian_mixture.hpp"
#include "glmb/label.hpp"

namespace glmb {

/// Axis-aligned box in measurement space.
struct Region {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  double volume() const { return (upper - lower).prod(); }
  bool contains(const Eigen::VectorXd& z) const {
    return (z.array() >= lower.array()).all() && (z.array() <= upper.array()).all();
  }
};

/// Poisson clutter: `rate` false alarms per scan on average, uniform over
/// `region` unless a custom intensity is supplied for filtering.
struct ClutterModel {
  double rate = 0.0;
  Region region;
  std::function<double(const Eigen::VectorXd&)> custom_intensity;

  /// kappa(z), per unit measurement-space volume.
  double intensity(const Eigen::VectorXd& z) const {
    if (custom_intensity) return custom_intensity(z);
    return rate / region.volume();
  }
};

/// Labeled multi-Bernoulli birth term.
struct BirthComponent {
  double existence = 0.0;
  GaussianMixture density;
};

/// Optional per-track substitutes for the global motion/measurement parameters.
struct TrackModelOverride {
  std::optional<double> p_S;
  std::optional<double> p_D;
  std::optional<Eigen::MatrixXd> F, Q, H, R;
};

struct MotionParams {
  const Eigen::MatrixXd& F;
  const Eigen::MatrixXd& Q;
  double p_S;
};

struct MeasurementParams {
  const Eigen::MatrixXd& H;
  const Eigen::MatrixXd& R;
  double p_D;
};

struct LinearGaussianModel {
  Eigen::MatrixXd F, Q;
  double p_S = 0.99;
  Eigen::MatrixXd H, R;
  double p_D = 0.88;
  ClutterModel clutter;
  std::vector<BirthComponent> birth;
  std::map<Label, TrackModelOverride> per_label;

  Eigen::Index state_dim() const { return F.rows(); }
  Eigen::Index meas_dim() const { return H.rows(); }

  MotionParams motion(const Label& l) const {
    if (auto it = per_label.find(l); it != per_label.end()) {
      const auto& o = it->second;
      return {o.F ? *o.F : F, o.Q ? *o.Q : Q, o.p_S.value_or(p_S)};
    }
    return {F, Q, p_S};
  }

  MeasurementParams measurement(const Label& l) const {
    if (auto it = per_label.find(l); it != per_label.end()) {
      const auto& o = it->second;
      return {o.H ? *o.H : H, o.R ? *o.R : R, o.p_D.value_or(p_D)};
    }
    return {H, R, p_D};
  }

  /// Birth labels for targets appearing at `time`: (time, 1..|B|).
  std::vector<Label> birth_labels(std::uint32_t time) const {
    std::vector<Label> out;
    for (std::size_t i = 0; i < birth.size(); ++i) out.push_back({time, static_cast<std::uint32_t>(i + 1)});
    return out;
  }

  /// Every problem found, one human-readable line each, naming the field.
  std::vector<std::string> problems() const {
    std::vector<std::string> out;
    auto open_unit = [&](const std::string& name, double v) {
      if (!(v > 0.0 && v < 1.0)) out.push_back(name + " = " + std::to_string(v) + " must lie strictly inside (0,1)");
    };
    const Eigen::Index n = F.rows();
    if (n == 0 || F.cols() != n) out.push_back("model.F must be square and non-empty");
    if (Q.rows() != n || Q.cols() != n) out.push_back("model.Q must be " + std::to_string(n) + "x" + std::to_string(n));
    if (H.cols() != n || H.rows() == 0) out.push_back("model.H must have " + std::to_string(n) + " columns");
    if (R.rows() != H.rows() || R.cols() != H.rows()) out.push_back("model.R must match the rows of H");
    open_unit("model.p_S", p_S);
    open_unit("model.p_D", p_D);
    if (!(clutter.rate >= 0.0)) out.push_back("model.clutter_rate must be non-negative");
    if (clutter.region.lower.size() != H.rows() || clutter.region.upper.size() != H.rows()) {
      out.push_back("model.region must have one [lo, hi] interval per measurement dimension");
    } else if (!(clutter.region.volume() > 0.0)) {
      out.push_back("model.region must have positive volume");
    }
    if (birth.empty()) out.push_back("model.birth must list at least one birth component");
    for (std::size_t i = 0; i < birth.size(); ++i) {
      const std::string tag = "model.birth[" + std::to_string(i) + "]";
      open_unit(tag + ".r", birth[i].existence);
      if (birth[i].density.components.empty()) out.push_back(tag + " has no Gaussian components");
      for (const auto& c : birth[i].density.components) {
        if (c.mean.size() != n || c.cov.rows() != n || c.cov.cols() != n) {
          out.push_back(tag + " component dimension does not match the state dimension");
        }
      }
      if (!birth[i].density.components.empty() && !birth[i].density.is_normalized()) {
        out.push_back(tag + " component weights must sum to 1");
      }
    }
    return out;
  }

  void validate() const {
    auto p = problems();
    if (!p.empty()) throw InputError(p.front());
  }
};

/// Nearly-constant-velocity model on [px, py, vx, vy] with position-only measurements.
inline LinearGaussianModel constant_velocity_model(double dt, double sigma_process, double sigma_meas) {
  LinearGaussianModel m;
  const Eigen::MatrixXd I2 = Eigen::MatrixXd::Identity(2, 2);
  m.F = Eigen::MatrixXd::Identity(4, 4);
  m.F.topRightCorner(2, 2) = dt * I2;
  m.Q = Eigen::MatrixXd::Zero(4, 4);
  const double s2 = sigma_process * sigma_process;
  m.Q.topLeftCorner(2, 2) = s2 * std::pow(dt, 4) / 4.0 * I2;
  m.Q.topRightCorner(2, 2) = s2 * std::pow(dt, 3) / 2.0 * I2;
  m.Q.bottomLeftCorner(2, 2) = s2 * std::pow(dt, 3) / 2.0 * I2;
  m.Q.bottomRightCorner(2, 2) = s2 * dt * dt * I2;
  m.H = Eigen::MatrixXd::Zero(2, 4);
  m.H.leftCols(2) = I2;
  m.R = sigma_meas * sigma_meas * I2;
  return m;
}

/// The reference linear-Gaussian scenario model: dt = 1 s, sigma_v = 5 m/s^2,
/// sigma_eps = 10 m, p_S = 0.99, p_D = 0.88, 66 false alarms per scan over
/// [-1000, 1000]^2 and three birth terms with r = 0.04.
///
/// Birth means are stored in this library's [px, py, vx, vy] order; the three
/// terms sit at (0, 100), (-100, -100) and (100, -100) with zero velocity.
inline LinearGaussianModel reference_model() {
  LinearGaussianModel m = constant_velocity_model(1.0, 5.0, 10.0);
  m.p_S = 0.99;
  m.p_D = 0.88;
  m.clutter.rate = 66.0;
  m.clutter.region = Region{Eigen::Vector2d(-1000.0, -1000.0), Eigen::Vector2d(1000.0, 1000.0)};
  const Eigen::MatrixXd PB = Eigen::VectorXd::Constant(4, 100.0).asDiagonal();
  for (const auto& pos : {Eigen::Vector2d(0.0, 100.0), Eigen::Vector2d(-100.0, -100.0),
                          Eigen::Vector2d(100.0, -100.0)}) {
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(4);
    mean.head(2) = pos;
    m.birth.push_back({0.04, GaussianMixture::single(mean, PB)});
  }
  return m;
}

}  // namespace glmb
