// SPDX-License-Identifier: Apache-2.0
//
// Energy-balance battery model and the fixed-step RK4 integrator shared by
// the physical model and the hybrid model.
#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "ude_grid/csv.hpp"
#include "ude_grid/errors.hpp"
#include "ude_grid/signals.hpp"

namespace ude_grid {

/// Battery energies of every node on a uniform sample grid.
///
/// `states` is node-major: the sample k of node i lives at i * size() + k.
class Trajectory {
 public:
  Trajectory() = default;
  Trajectory(std::vector<double> times, std::size_t n_nodes)
      : times_(std::move(times)), n_nodes_(n_nodes), states_(n_nodes_ * times_.size(), 0.0) {}

  std::size_t n_nodes() const noexcept { return n_nodes_; }
  std::size_t size() const noexcept { return times_.size(); }
  const std::vector<double>& times() const noexcept { return times_; }
  double time(std::size_t k) const { return times_.at(k); }

  double& at(std::size_t node, std::size_t k) { return states_[node * times_.size() + k]; }
  double at(std::size_t node, std::size_t k) const { return states_[node * times_.size() + k]; }

  std::span<const double> node(std::size_t i) const {
    return std::span<const double>(states_).subspan(i * times_.size(), times_.size());
  }
  const std::vector<double>& states() const noexcept { return states_; }

  /// Samples with t in [t_from, t_to], grid values compared exactly.
  Trajectory slice(double t_from, double t_to) const {
    std::size_t first = 0;
    while (first < size() && times_[first] < t_from) ++first;
    std::size_t last = first;
    while (last < size() && times_[last] <= t_to) ++last;
    Trajectory out(std::vector<double>(times_.begin() + first, times_.begin() + last), n_nodes_);
    for (std::size_t i = 0; i < n_nodes_; ++i) {
      for (std::size_t k = first; k < last; ++k) out.at(i, k - first) = at(i, k);
    }
    return out;
  }

  friend bool operator==(const Trajectory&, const Trajectory&) = default;

 private:
  std::vector<double> times_;
  std::size_t n_nodes_ = 0;
  std::vector<double> states_;
};

enum class SolverMethod { Rk4 };

struct SolverSpec {
  double step_hours = 0.25;
  SolverMethod method = SolverMethod::Rk4;
};

/// Sample/step bookkeeping for one integration run.
struct StepGrid {
  double t0 = 0.0;
  double step = 0.0;
  double sample_interval = 0.0;
  std::size_t steps_per_sample = 0;
  std::size_t n_samples = 0;  // including t0

  std::size_t n_steps() const noexcept { return (n_samples - 1) * steps_per_sample; }
  double sample_time(std::size_t k) const noexcept {
    return t0 + static_cast<double>(k) * sample_interval;
  }
  /// Start time of step j; anchored on the enclosing sample so step starts
  /// coincide bit-wise with sample times.
  double step_time(std::size_t j) const noexcept {
    return sample_time(j / steps_per_sample) + static_cast<double>(j % steps_per_sample) * step;
  }
};

/// Time at which the last RK4 stage of the step [t, t + h] is evaluated.
///
/// The forcing is only piecewise smooth: the daily wrap of t mod 24 makes
/// load jump at every midnight, which lies on the step grid. Taking the
/// final stage one ulp inside the step reads the left limit, so every step
/// sees a single smooth piece and the method keeps fourth order.
inline double end_stage_time(double t, double h) noexcept { return std::nextafter(t + h, t); }

namespace detail {

inline std::size_t whole_ratio(double num, double den, const char* what) {
  const double ratio = num / den;
  const double rounded = std::round(ratio);
  if (!(rounded >= 1.0) || std::abs(ratio - rounded) > 1e-9 * rounded) {
    throw ConfigError(std::string(what) + " is not a positive integer multiple");
  }
  return static_cast<std::size_t>(rounded);
}

}  // namespace detail

inline StepGrid make_grid(double t0, double t1, const SolverSpec& spec, double sample_interval) {
  if (!std::isfinite(t0) || !std::isfinite(t1) || !(t1 > t0)) {
    throw ConfigError("integration interval requires finite t1 > t0");
  }
  if (!(spec.step_hours > 0.0) || !std::isfinite(spec.step_hours)) {
    throw ConfigError("SolverSpec.step_hours must be finite and > 0");
  }
  if (!(sample_interval > 0.0) || !std::isfinite(sample_interval)) {
    throw ConfigError("sample_interval_hours must be finite and > 0");
  }
  StepGrid g;
  g.t0 = t0;
  g.step = spec.step_hours;
  g.sample_interval = sample_interval;
  g.steps_per_sample = detail::whole_ratio(sample_interval, spec.step_hours,
                                           "sample_interval_hours / step_hours");
  g.n_samples = detail::whole_ratio(t1 - t0, sample_interval, "horizon / sample_interval_hours") + 1;
  return g;
}

/// Vector field f(t, y, dydt) over the stacked node states.
using VectorField =
    std::function<void(double t, std::span<const double> y, std::span<double> dydt)>;

/// Stage inputs of every RK4 step, kept for the reverse sweep.
///
/// Layout: [step][stage 0..3][state index].
struct StageTape {
  std::size_t dim = 0;
  std::vector<double> inputs;

  std::span<const double> stage(std::size_t step, std::size_t s) const {
    return std::span<const double>(inputs).subspan((step * 4 + s) * dim, dim);
  }
};

/// Classic fixed-step RK4 with samples on the step grid (no interpolation).
///
/// `Rhs` is any callable with the VectorField signature. Throws
/// DivergenceError naming the first step that produced a non-finite state.
template <class Rhs>
Trajectory integrate(Rhs&& rhs, std::span<const double> y0, double t0, double t1,
                     const SolverSpec& spec, double sample_interval, StageTape* tape = nullptr) {
  const StepGrid grid = make_grid(t0, t1, spec, sample_interval);
  const std::size_t n = y0.size();
  for (double v : y0) {
    if (!std::isfinite(v)) throw DomainError("initial state must be finite");
  }

  std::vector<double> times(grid.n_samples);
  for (std::size_t k = 0; k < grid.n_samples; ++k) times[k] = grid.sample_time(k);
  Trajectory traj(std::move(times), n);

  std::vector<double> y(y0.begin(), y0.end());
  std::vector<double> k1(n), k2(n), k3(n), k4(n), s(n);
  const double h = grid.step;
  const double half = 0.5 * h;
  const double sixth = h / 6.0;

  if (tape != nullptr) {
    tape->dim = n;
    tape->inputs.clear();
    tape->inputs.reserve(grid.n_steps() * 4 * n);
  }
  auto record = [&](const std::vector<double>& v) {
    if (tape != nullptr) tape->inputs.insert(tape->inputs.end(), v.begin(), v.end());
  };

  for (std::size_t i = 0; i < n; ++i) traj.at(i, 0) = y[i];
  for (std::size_t j = 0; j < grid.n_steps(); ++j) {
    const double t = grid.step_time(j);

    record(y);
    rhs(t, std::span<const double>(y), std::span<double>(k1));
    for (std::size_t i = 0; i < n; ++i) s[i] = y[i] + half * k1[i];
    record(s);
    rhs(t + half, std::span<const double>(s), std::span<double>(k2));
    for (std::size_t i = 0; i < n; ++i) s[i] = y[i] + half * k2[i];
    record(s);
    rhs(t + half, std::span<const double>(s), std::span<double>(k3));
    for (std::size_t i = 0; i < n; ++i) s[i] = y[i] + h * k3[i];
    record(s);
    rhs(end_stage_time(t, h), std::span<const double>(s), std::span<double>(k4));

    bool finite = true;
    for (std::size_t i = 0; i < n; ++i) {
      y[i] += sixth * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
      finite = finite && std::isfinite(y[i]);
    }
    if (!finite) throw DivergenceError(j, t);

    if ((j + 1) % grid.steps_per_sample == 0) {
      const std::size_t k = (j + 1) / grid.steps_per_sample;
      for (std::size_t i = 0; i < n; ++i) traj.at(i, k) = y[i];
    }
  }
  return traj;
}

/// Right-hand side of the physical battery model; independent of `e`.
inline double rhs_physical(std::size_t node, double t, double /*e*/, const ScenarioConfig& cfg) {
  return net_power(node, t, cfg);
}

/// Known extra term a*sin(omega*t) added to the truth dynamics.
///
/// Test hook for validating that training learns a nonzero target; the
/// default (a = 0) leaves the physical model untouched.
struct ResidualInjection {
  double amplitude = 0.0;
  double omega = 0.0;

  bool active() const noexcept { return amplitude != 0.0; }
  double operator()(double t) const { return amplitude * std::sin(omega * t); }
};

/// Integrates dE_i/dt = forcing(i, t) for every node from `initial`.
template <class Forcing>
Trajectory simulate_forced(Forcing&& forcing, std::span<const double> initial,
                           const SolverSpec& spec, double horizon, double sample_interval) {
  auto rhs = [&](double t, std::span<const double> y, std::span<double> dydt) {
    for (std::size_t i = 0; i < y.size(); ++i) dydt[i] = forcing(i, t);
  };
  return integrate(rhs, initial, 0.0, horizon, spec, sample_interval);
}

/// Ground-truth trajectories of the physical model for every node.
inline Trajectory simulate_truth(const ScenarioConfig& cfg, const SolverSpec& spec, double horizon,
                                 const ResidualInjection& injection = {}) {
  cfg.validate();
  if (!(horizon > 0.0)) throw ConfigError("horizon must be > 0");
  if (injection.active()) {
    return simulate_forced(
        [&](std::size_t i, double t) { return rhs_physical(i, t, 0.0, cfg) + injection(t); },
        cfg.initial_energy, spec, horizon, cfg.sample_interval_hours);
  }
  return simulate_forced([&](std::size_t i, double t) { return rhs_physical(i, t, 0.0, cfg); },
                         cfg.initial_energy, spec, horizon, cfg.sample_interval_hours);
}

// CSV: header `t,node0,node1,...`, one row per sample, 17 significant digits.

inline void write_trajectory_csv(std::ostream& os, const Trajectory& traj,
                                 const std::string& column_prefix = "node") {
  os << 't';
  for (std::size_t i = 0; i < traj.n_nodes(); ++i) os << ',' << column_prefix << i;
  os << '\n';
  for (std::size_t k = 0; k < traj.size(); ++k) {
    os << csv::format_double(traj.time(k));
    for (std::size_t i = 0; i < traj.n_nodes(); ++i) os << ',' << csv::format_double(traj.at(i, k));
    os << '\n';
  }
}

inline Trajectory read_trajectory_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw IoError("trajectory CSV is empty");
  const auto header = csv::split_fields(line);
  if (header.empty() || header[0] != "t") throw IoError("trajectory CSV must start with column 't'");
  const std::size_t n = header.size() - 1;
  std::vector<double> times;
  std::vector<std::vector<double>> cols(n);
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto fields = csv::split_fields(line);
    if (fields.size() != n + 1) throw IoError("trajectory CSV row has wrong column count");
    times.push_back(csv::parse_double(fields[0]));
    for (std::size_t i = 0; i < n; ++i) cols[i].push_back(csv::parse_double(fields[i + 1]));
  }
  Trajectory traj(std::move(times), n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < traj.size(); ++k) traj.at(i, k) = cols[i][k];
  }
  return traj;
}

}  // namespace ude_grid
