// SPDX-License-Identifier: Apache-2.0
//
// Synthetic solar input and per-node household load. Time is in hours,
// power and energy are dimensionless. The "noise" terms are fixed
// low-frequency sinusoids, so every signal is a deterministic function of t.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <string>
#include <vector>

#include "ude_grid/errors.hpp"

namespace ude_grid {

/// Scenario constants shared by signal generation, simulation and training.
struct ScenarioConfig {
  std::size_t n_nodes = 3;
  std::vector<double> base_loads{0.45, 0.5, 0.55};
  double peak_width_sigma = 1.5;
  double morning_peak_amp = 0.3;
  double morning_peak_hour = 8.0;
  double evening_peak_amp = 0.4;
  double evening_peak_hour = 19.0;
  double solar_noise_amp = 0.05;
  double solar_noise_freq = 0.1;
  double load_noise_amp = 0.02;
  double load_noise_freq = 0.07;
  std::vector<double> load_noise_phases = default_phases(3);
  double train_horizon_hours = 240.0;
  double forecast_horizon_hours = 720.0;
  double sample_interval_hours = 1.0;
  std::vector<double> initial_energy{0.0, 0.0, 0.0};

  /// Evenly spread phases 2*pi*i/n.
  static std::vector<double> default_phases(std::size_t n) {
    std::vector<double> phases(n);
    for (std::size_t i = 0; i < n; ++i) {
      phases[i] = 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n);
    }
    return phases;
  }

  /// Throws ConfigError on the first violated invariant.
  ///
  /// Noise amplitudes may be zero: the periodicity and ordering checks run
  /// with the noise switched off, so only negative amplitudes are rejected.
  void validate() const {
    auto fail = [](const std::string& field, const std::string& why) {
      throw ConfigError("ScenarioConfig." + field + ": " + why);
    };
    if (n_nodes == 0) fail("n_nodes", "must be at least 1");
    if (base_loads.size() != n_nodes) fail("base_loads", "length must equal n_nodes");
    if (load_noise_phases.size() != n_nodes) fail("load_noise_phases", "length must equal n_nodes");
    if (initial_energy.size() != n_nodes) fail("initial_energy", "length must equal n_nodes");
    for (double b : base_loads) {
      if (!(b > 0.0) || !std::isfinite(b)) fail("base_loads", "values must be finite and > 0");
    }
    for (double p : load_noise_phases) {
      if (!std::isfinite(p)) fail("load_noise_phases", "values must be finite");
    }
    for (double e : initial_energy) {
      if (!std::isfinite(e)) fail("initial_energy", "values must be finite");
    }
    auto positive = [&](double v, const char* name) {
      if (!(v > 0.0) || !std::isfinite(v)) fail(name, "must be finite and > 0");
    };
    auto non_negative = [&](double v, const char* name) {
      if (!(v >= 0.0) || !std::isfinite(v)) fail(name, "must be finite and >= 0");
    };
    positive(peak_width_sigma, "peak_width_sigma");
    positive(morning_peak_amp, "morning_peak_amp");
    positive(evening_peak_amp, "evening_peak_amp");
    non_negative(solar_noise_amp, "solar_noise_amp");
    non_negative(load_noise_amp, "load_noise_amp");
    positive(solar_noise_freq, "solar_noise_freq");
    positive(load_noise_freq, "load_noise_freq");
    positive(train_horizon_hours, "train_horizon_hours");
    positive(forecast_horizon_hours, "forecast_horizon_hours");
    positive(sample_interval_hours, "sample_interval_hours");
    if (!std::isfinite(morning_peak_hour)) fail("morning_peak_hour", "must be finite");
    if (!std::isfinite(evening_peak_hour)) fail("evening_peak_hour", "must be finite");
    if (train_horizon_hours > forecast_horizon_hours) {
      fail("train_horizon_hours", "must not exceed forecast_horizon_hours");
    }
  }
};

namespace detail {

inline void require_time(double t) {
  if (!std::isfinite(t)) throw DomainError("time must be finite");
  if (t < 0.0) throw DomainError("time must be non-negative");
}

inline void require_node(std::size_t node, const ScenarioConfig& cfg) {
  if (node >= cfg.n_nodes) {
    throw IndexError("node " + std::to_string(node) + " out of range for " +
                     std::to_string(cfg.n_nodes) + " nodes");
  }
}

inline double hour_of_day(double t) { return std::fmod(t, 24.0); }

}  // namespace detail

/// Half-sine daylight term clamped at zero, plus unclamped drift noise.
/// Night-time values can therefore dip slightly below zero.
inline double solar_power(double t, const ScenarioConfig& cfg) {
  detail::require_time(t);
  const double phase = std::numbers::pi * (detail::hour_of_day(t) - 6.0) / 12.0;
  return std::max(0.0, std::sin(phase)) + cfg.solar_noise_amp * std::sin(cfg.solar_noise_freq * t);
}

inline double solar_power(double t) { return solar_power(t, ScenarioConfig{}); }

/// Base load plus morning and evening Gaussian peaks and phase-shifted noise.
inline double load_demand(std::size_t node, double t, const ScenarioConfig& cfg) {
  detail::require_node(node, cfg);
  detail::require_time(t);
  const double h = detail::hour_of_day(t);
  const double two_var = 2.0 * cfg.peak_width_sigma * cfg.peak_width_sigma;
  const double dm = h - cfg.morning_peak_hour;
  const double de = h - cfg.evening_peak_hour;
  return cfg.base_loads[node] + cfg.morning_peak_amp * std::exp(-dm * dm / two_var) +
         cfg.evening_peak_amp * std::exp(-de * de / two_var) +
         cfg.load_noise_amp * std::sin(cfg.load_noise_freq * t + cfg.load_noise_phases[node]);
}

/// Solar minus load: positive when the node's battery charges.
inline double net_power(std::size_t node, double t, const ScenarioConfig& cfg) {
  return solar_power(t, cfg) - load_demand(node, t, cfg);
}

}  // namespace ude_grid
