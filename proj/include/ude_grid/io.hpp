// SPDX-License-Identifier: Apache-2.0
//
// JSON documents: run configuration, network checkpoints, training reports
// and metrics. CSV helpers for loss histories live here too.
#pragma once

#include <cstdint>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "ude_grid/csv.hpp"
#include "ude_grid/dynamics.hpp"
#include "ude_grid/errors.hpp"
#include "ude_grid/mlp.hpp"
#include "ude_grid/signals.hpp"
#include "ude_grid/trainer.hpp"

namespace ude_grid {

/// Everything a CLI run needs; defaults reproduce the reference setup.
struct RunConfig {
  ScenarioConfig scenario;
  SolverSpec solver;
  std::uint64_t seed = 0;
  std::size_t iterations = 300;
  double lr = 0.005;
  std::vector<std::size_t> layer_sizes{2, 16, 16, 1};
  /// Unset scales fall back to t_scale = train horizon, e_scale = 50.
  std::optional<double> t_scale;
  std::optional<double> e_scale;
  ResidualInjection injection;

  InputNormalizer normalizer() const {
    InputNormalizer n;
    n.t_scale = t_scale.value_or(scenario.train_horizon_hours);
    n.e_scale = e_scale.value_or(50.0);
    return n;
  }

  void validate() const {
    scenario.validate();
    make_grid(0.0, scenario.train_horizon_hours, solver, scenario.sample_interval_hours);
    make_grid(0.0, scenario.forecast_horizon_hours, solver, scenario.sample_interval_hours);
    MlpParams::validate_shape(layer_sizes);
    normalizer().validate();
    if (iterations < 1) throw ConfigError("iterations must be >= 1");
    if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("lr must be finite and > 0");
    if (!std::isfinite(injection.amplitude) || !std::isfinite(injection.omega)) {
      throw ConfigError("inject_residual values must be finite");
    }
  }
};

namespace detail {

template <class T>
T json_get(const nlohmann::json& j, const std::string& key) {
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("field '" + key + "': " + e.what());
  }
}

}  // namespace detail

/// Parses a run configuration. Absent fields keep their defaults; unknown
/// fields are rejected so typos do not pass silently.
inline RunConfig parse_run_config(const nlohmann::json& j) {
  using detail::json_get;
  if (!j.is_object()) throw ConfigError("configuration must be a JSON object");
  RunConfig rc;
  ScenarioConfig& s = rc.scenario;
  bool phases_given = false;
  bool energy_given = false;
  for (const auto& [key, value] : j.items()) {
    if (key == "n_nodes") s.n_nodes = json_get<std::size_t>(j, key);
    else if (key == "base_loads") s.base_loads = json_get<std::vector<double>>(j, key);
    else if (key == "peak_width_sigma") s.peak_width_sigma = json_get<double>(j, key);
    else if (key == "morning_peak_amp") s.morning_peak_amp = json_get<double>(j, key);
    else if (key == "morning_peak_hour") s.morning_peak_hour = json_get<double>(j, key);
    else if (key == "evening_peak_amp") s.evening_peak_amp = json_get<double>(j, key);
    else if (key == "evening_peak_hour") s.evening_peak_hour = json_get<double>(j, key);
    else if (key == "solar_noise_amp") s.solar_noise_amp = json_get<double>(j, key);
    else if (key == "solar_noise_freq") s.solar_noise_freq = json_get<double>(j, key);
    else if (key == "load_noise_amp") s.load_noise_amp = json_get<double>(j, key);
    else if (key == "load_noise_freq") s.load_noise_freq = json_get<double>(j, key);
    else if (key == "load_noise_phases") {
      s.load_noise_phases = json_get<std::vector<double>>(j, key);
      phases_given = true;
    } else if (key == "train_horizon_hours") s.train_horizon_hours = json_get<double>(j, key);
    else if (key == "forecast_horizon_hours") s.forecast_horizon_hours = json_get<double>(j, key);
    else if (key == "sample_interval_hours") s.sample_interval_hours = json_get<double>(j, key);
    else if (key == "initial_energy") {
      // A scalar applies to every node.
      if (value.is_number()) {
        s.initial_energy.assign(1, json_get<double>(j, key));
      } else {
        s.initial_energy = json_get<std::vector<double>>(j, key);
      }
      energy_given = true;
    } else if (key == "step_hours") rc.solver.step_hours = json_get<double>(j, key);
    else if (key == "method") {
      if (json_get<std::string>(j, key) != "RK4") throw ConfigError("method: only \"RK4\" is supported");
    } else if (key == "seed") rc.seed = json_get<std::uint64_t>(j, key);
    else if (key == "iterations") rc.iterations = json_get<std::size_t>(j, key);
    else if (key == "lr") rc.lr = json_get<double>(j, key);
    else if (key == "layer_sizes") rc.layer_sizes = json_get<std::vector<std::size_t>>(j, key);
    else if (key == "t_scale") rc.t_scale = json_get<double>(j, key);
    else if (key == "e_scale") rc.e_scale = json_get<double>(j, key);
    else if (key == "inject_residual_amp") rc.injection.amplitude = json_get<double>(j, key);
    else if (key == "inject_residual_omega") rc.injection.omega = json_get<double>(j, key);
    else throw ConfigError("unknown configuration field '" + key + "'");
  }
  if (!phases_given) s.load_noise_phases = ScenarioConfig::default_phases(s.n_nodes);
  if (!energy_given) s.initial_energy.assign(s.n_nodes, 0.0);
  if (energy_given && s.initial_energy.size() == 1 && s.n_nodes > 1) {
    s.initial_energy.assign(s.n_nodes, s.initial_energy.front());
  }
  rc.validate();
  return rc;
}

inline RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config '" + path + "' is not valid JSON: " + e.what());
  }
  return parse_run_config(j);
}

// Checkpoints --------------------------------------------------------------

struct Checkpoint {
  MlpParams params;
  InputNormalizer norm;
  std::uint64_t seed = 0;
  std::size_t iterations_trained = 0;
};

inline nlohmann::json to_json(const Checkpoint& ck) {
  nlohmann::json j;
  j["layer_sizes"] = ck.params.layer_sizes;
  j["theta"] = ck.params.theta;
  j["t_scale"] = ck.norm.t_scale;
  j["e_scale"] = ck.norm.e_scale;
  j["seed"] = ck.seed;
  j["iterations_trained"] = ck.iterations_trained;
  return j;
}

inline Checkpoint checkpoint_from_json(const nlohmann::json& j) {
  using detail::json_get;
  if (!j.is_object()) throw ConfigError("checkpoint must be a JSON object");
  Checkpoint ck;
  ck.params.layer_sizes = json_get<std::vector<std::size_t>>(j, "layer_sizes");
  ck.params.theta = json_get<std::vector<double>>(j, "theta");
  ck.norm.t_scale = json_get<double>(j, "t_scale");
  ck.norm.e_scale = json_get<double>(j, "e_scale");
  ck.seed = json_get<std::uint64_t>(j, "seed");
  ck.iterations_trained = json_get<std::size_t>(j, "iterations_trained");
  try {
    ck.params.validate();
  } catch (const std::exception& e) {
    throw ConfigError(std::string("checkpoint theta/layer_sizes: ") + e.what());
  }
  ck.norm.validate();
  return ck;
}

/// Throws ConfigError naming the first field where a checkpoint disagrees
/// with an explicitly configured value.
inline void check_compatible(const Checkpoint& ck, const RunConfig& rc) {
  if (ck.params.layer_sizes != rc.layer_sizes) {
    throw ConfigError("checkpoint/config mismatch in field 'layer_sizes'");
  }
  if (rc.t_scale && *rc.t_scale != ck.norm.t_scale) {
    throw ConfigError("checkpoint/config mismatch in field 't_scale'");
  }
  if (rc.e_scale && *rc.e_scale != ck.norm.e_scale) {
    throw ConfigError("checkpoint/config mismatch in field 'e_scale'");
  }
}

// Reports ----------------------------------------------------------------

inline nlohmann::json to_json(const TrainReport& r) {
  nlohmann::json j;
  j["loss_history"] = r.loss_history;
  j["final_theta"] = r.final_theta;
  j["iterations"] = r.iterations;
  j["lr"] = r.lr;
  j["beta1"] = r.beta1;
  j["beta2"] = r.beta2;
  j["eps"] = r.eps;
  j["seed"] = r.seed;
  j["sample_count"] = r.sample_count;
  j["wall_time_seconds"] = r.wall_time_seconds;
  return j;
}

inline nlohmann::json to_json(const Metrics& m) {
  nlohmann::json j;
  j["rmse_per_node"] = m.rmse_per_node;
  j["rmse_total"] = m.rmse_total;
  j["max_abs_err"] = m.max_abs_err;
  return j;
}

/// `iter,loss` rows, one per recorded iteration.
inline void write_loss_csv(std::ostream& os, const std::vector<double>& history) {
  os << "iter,loss\n";
  for (std::size_t i = 0; i < history.size(); ++i) {
    os << i << ',' << csv::format_double(history[i]) << '\n';
  }
}

}  // namespace ude_grid
