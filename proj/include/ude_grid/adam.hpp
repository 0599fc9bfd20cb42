// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "ude_grid/errors.hpp"

namespace ude_grid {

/// Moment estimates and hyperparameters of one ADAM run.
struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::uint64_t step_count = 0;
  double lr = 0.005;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  friend bool operator==(const AdamState&, const AdamState&) = default;
};

inline AdamState adam_init(std::size_t param_len, double lr) {
  if (param_len == 0) throw ConfigError("ADAM needs at least one parameter");
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("learning rate must be finite and > 0");
  AdamState s;
  s.m.assign(param_len, 0.0);
  s.v.assign(param_len, 0.0);
  s.lr = lr;
  return s;
}

/// One bias-corrected ADAM update, in place.
inline void adam_update(AdamState& state, std::span<double> theta, std::span<const double> grad) {
  if (theta.size() != state.m.size() || grad.size() != state.m.size()) {
    throw ShapeError("ADAM state, theta and gradient lengths differ");
  }
  for (double g : grad) {
    if (!std::isfinite(g)) throw DomainError("gradient contains a non-finite entry");
  }
  ++state.step_count;
  const double t = static_cast<double>(state.step_count);
  const double m_corr = 1.0 - std::pow(state.beta1, t);
  const double v_corr = 1.0 - std::pow(state.beta2, t);
  for (std::size_t j = 0; j < theta.size(); ++j) {
    const double g = grad[j];
    state.m[j] = state.beta1 * state.m[j] + (1.0 - state.beta1) * g;
    state.v[j] = state.beta2 * state.v[j] + (1.0 - state.beta2) * g * g;
    const double m_hat = state.m[j] / m_corr;
    const double v_hat = state.v[j] / v_corr;
    theta[j] -= state.lr * m_hat / (std::sqrt(v_hat) + state.eps);
  }
}

/// Functional form: returns the advanced state and updated parameters.
inline std::pair<AdamState, std::vector<double>> adam_step(AdamState state, std::vector<double> theta,
                                                           std::span<const double> grad) {
  adam_update(state, theta, grad);
  return {std::move(state), std::move(theta)};
}

}  // namespace ude_grid
