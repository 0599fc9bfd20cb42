// SPDX-License-Identifier: Apache-2.0
//
// Hybrid battery model dE/dt = P_s(t) - P_d(t) + NN(t, E): rollout, the
// trajectory loss and its exact gradient by reverse sweep over the stored
// RK4 stages (discrete adjoint).
#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "ude_grid/dynamics.hpp"
#include "ude_grid/errors.hpp"
#include "ude_grid/mlp.hpp"
#include "ude_grid/signals.hpp"

namespace ude_grid {

struct UdeSystem {
  ScenarioConfig cfg;
  MlpParams params;
  InputNormalizer norm;
  SolverSpec spec;

  void validate() const {
    cfg.validate();
    params.validate();
    norm.validate();
    detail::whole_ratio(cfg.sample_interval_hours, spec.step_hours, "sample_interval_hours / step_hours");
  }
};

struct LossReport {
  double loss = 0.0;
  std::vector<double> grad_theta;
};

inline double rhs_ude(std::size_t node, double t, double e, const UdeSystem& sys) {
  return rhs_physical(node, t, e, sys.cfg) + forward(sys.params, sys.norm, t, e);
}

namespace detail {

/// Vector field of the hybrid model over all nodes. A non-finite state
/// yields a NaN derivative so the integrator reports the divergence.
class UdeField {
 public:
  explicit UdeField(const UdeSystem& sys) : sys_(sys) {}

  void operator()(double t, std::span<const double> y, std::span<double> dydt) {
    for (std::size_t i = 0; i < y.size(); ++i) {
      if (!std::isfinite(y[i])) {
        dydt[i] = std::numeric_limits<double>::quiet_NaN();
        continue;
      }
      dydt[i] = rhs_physical(i, t, y[i], sys_.cfg) + forward(sys_.params, sys_.norm, t, y[i], ws_);
    }
  }

 private:
  const UdeSystem& sys_;
  MlpWorkspace ws_;
};

inline void require_same_grid(const Trajectory& a, const Trajectory& b) {
  if (a.n_nodes() != b.n_nodes()) throw ShapeError("trajectories have different node counts");
  if (a.times() != b.times()) throw ShapeError("trajectories are sampled on different time grids");
}

}  // namespace detail

/// Forward integration of the hybrid model from the configured initial energy.
inline Trajectory rollout(const UdeSystem& sys, double horizon, StageTape* tape = nullptr) {
  sys.validate();
  if (!(horizon > 0.0)) throw ConfigError("horizon must be > 0");
  detail::UdeField field(sys);
  return integrate(field, sys.cfg.initial_energy, 0.0, horizon, sys.spec,
                   sys.cfg.sample_interval_hours, tape);
}

/// Sum of squared differences over every node and sample (t = 0 included).
inline double sum_squared_error(const Trajectory& pred, const Trajectory& truth) {
  detail::require_same_grid(pred, truth);
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.n_nodes(); ++i) {
    for (std::size_t k = 0; k < pred.size(); ++k) {
      const double d = pred.at(i, k) - truth.at(i, k);
      sum += d * d;
    }
  }
  return sum;
}

namespace detail {

inline double horizon_of(const Trajectory& truth) {
  if (truth.size() < 2) throw ShapeError("truth needs at least two samples");
  if (truth.time(0) != 0.0) throw ShapeError("truth grid must start at t = 0");
  return truth.times().back();
}

}  // namespace detail

inline double loss(const UdeSystem& sys, const Trajectory& truth) {
  const Trajectory pred = rollout(sys, detail::horizon_of(truth));
  return sum_squared_error(pred, truth);
}

/// Loss and its exact gradient with respect to theta.
///
/// The forward pass records every RK4 stage input; the reverse sweep walks
/// the steps backwards, pushing the state adjoint through each stage with
/// the network's reverse mode and injecting 2 * (pred - truth) at every
/// sample time. The physical term depends on neither theta nor E, so it
/// drops out of the sweep.
inline LossReport loss_and_grad(const UdeSystem& sys, const Trajectory& truth) {
  const double horizon = detail::horizon_of(truth);
  StageTape tape;
  const Trajectory pred = rollout(sys, horizon, &tape);

  LossReport report;
  report.loss = sum_squared_error(pred, truth);
  report.grad_theta.assign(sys.params.theta.size(), 0.0);

  const StepGrid grid = make_grid(0.0, horizon, sys.spec, sys.cfg.sample_interval_hours);
  const std::size_t n = pred.n_nodes();
  const double h = grid.step;
  const double half = 0.5 * h;
  const double sixth = h / 6.0;
  std::vector<double> adj(n, 0.0);
  MlpWorkspace ws;
  std::span<double> grad(report.grad_theta);

  for (std::size_t j = grid.n_steps(); j-- > 0;) {
    if ((j + 1) % grid.steps_per_sample == 0) {
      const std::size_t k = (j + 1) / grid.steps_per_sample;
      for (std::size_t i = 0; i < n; ++i) adj[i] += 2.0 * (pred.at(i, k) - truth.at(i, k));
    }
    const double t = grid.step_time(j);
    const auto s1 = tape.stage(j, 0);
    const auto s2 = tape.stage(j, 1);
    const auto s3 = tape.stage(j, 2);
    const auto s4 = tape.stage(j, 3);
    for (std::size_t i = 0; i < n; ++i) {
      const double lam = adj[i];
      double k1_bar = sixth * lam;
      double k2_bar = 2.0 * sixth * lam;
      double k3_bar = 2.0 * sixth * lam;
      const double k4_bar = sixth * lam;
      double y_bar = lam;

      double ge = backward_accumulate(sys.params, sys.norm, end_stage_time(t, h), s4[i], k4_bar, grad, ws);
      y_bar += ge;
      k3_bar += h * ge;

      ge = backward_accumulate(sys.params, sys.norm, t + half, s3[i], k3_bar, grad, ws);
      y_bar += ge;
      k2_bar += half * ge;

      ge = backward_accumulate(sys.params, sys.norm, t + half, s2[i], k2_bar, grad, ws);
      y_bar += ge;
      k1_bar += half * ge;

      ge = backward_accumulate(sys.params, sys.norm, t, s1[i], k1_bar, grad, ws);
      y_bar += ge;

      adj[i] = y_bar;
    }
  }
  return report;
}

/// Central finite differences of `loss` in every theta component. Slow;
/// used as the reference for the reverse sweep.
inline std::vector<double> finite_difference_grad(const UdeSystem& sys, const Trajectory& truth,
                                                  double eps) {
  UdeSystem probe = sys;
  std::vector<double> g(sys.params.theta.size());
  for (std::size_t p = 0; p < g.size(); ++p) {
    const double orig = probe.params.theta[p];
    probe.params.theta[p] = orig + eps;
    const double up = loss(probe, truth);
    probe.params.theta[p] = orig - eps;
    const double down = loss(probe, truth);
    probe.params.theta[p] = orig;
    g[p] = (up - down) / (2.0 * eps);
  }
  return g;
}

}  // namespace ude_grid
