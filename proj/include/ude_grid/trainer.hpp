// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "ude_grid/adam.hpp"
#include "ude_grid/dynamics.hpp"
#include "ude_grid/errors.hpp"
#include "ude_grid/mlp.hpp"
#include "ude_grid/ude.hpp"

namespace ude_grid {

struct TrainReport {
  std::vector<double> loss_history;  // loss before each update
  std::vector<double> final_theta;
  std::size_t iterations = 0;
  double lr = 0.005;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t seed = 0;
  std::size_t sample_count = 0;  // nodes x samples; loss / sample_count is the mean
  double wall_time_seconds = 0.0;
};

struct TrainResult {
  MlpParams params;
  TrainReport report;
};

/// Thrown when a rollout diverges mid-training; carries the history so far.
class TrainingDiverged : public DivergenceError {
 public:
  TrainingDiverged(const DivergenceError& cause, TrainReport partial)
      : DivergenceError(cause), partial_(std::move(partial)) {}
  const TrainReport& partial_report() const noexcept { return partial_; }

 private:
  TrainReport partial_;
};

struct TrainOptions {
  std::vector<std::size_t> layer_sizes{2, 16, 16, 1};
  InputNormalizer norm;
  ResidualInjection injection;
  /// Called after every update as (iteration index, current params).
  std::function<void(std::size_t, const MlpParams&)> on_iteration;
};

/// Full-batch training of the residual network against the physical truth.
inline TrainResult train(const ScenarioConfig& cfg, const SolverSpec& spec, std::uint64_t seed,
                         std::size_t iterations = 300, double lr = 0.005,
                         const TrainOptions& options = {}) {
  if (iterations < 1) throw ConfigError("iterations must be >= 1");
  const auto started = std::chrono::steady_clock::now();

  const Trajectory truth = simulate_truth(cfg, spec, cfg.train_horizon_hours, options.injection);
  UdeSystem sys{cfg, init_params(seed, options.layer_sizes), options.norm, spec};
  sys.validate();
  AdamState adam = adam_init(sys.params.theta.size(), lr);

  TrainReport report;
  report.lr = lr;
  report.beta1 = adam.beta1;
  report.beta2 = adam.beta2;
  report.eps = adam.eps;
  report.seed = seed;
  report.sample_count = truth.n_nodes() * truth.size();
  report.loss_history.reserve(iterations);

  auto elapsed = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  };

  for (std::size_t it = 0; it < iterations; ++it) {
    LossReport lr_report;
    auto give_up = [&](const DivergenceError& err) {
      report.iterations = report.loss_history.size();
      report.final_theta = sys.params.theta;
      report.wall_time_seconds = elapsed();
      throw TrainingDiverged(err, std::move(report));
    };
    try {
      lr_report = loss_and_grad(sys, truth);
    } catch (const DivergenceError& err) {
      give_up(err);
    }
    const auto& g = lr_report.grad_theta;
    if (!std::isfinite(lr_report.loss) ||
        !std::all_of(g.begin(), g.end(), [](double v) { return std::isfinite(v); })) {
      give_up(DivergenceError("non-finite loss or gradient at iteration " + std::to_string(it), 0,
                              0.0));
    }
    report.loss_history.push_back(lr_report.loss);
    adam_update(adam, sys.params.theta, lr_report.grad_theta);
    if (options.on_iteration) options.on_iteration(it, sys.params);
  }

  report.iterations = iterations;
  report.final_theta = sys.params.theta;
  report.wall_time_seconds = elapsed();
  return {std::move(sys.params), std::move(report)};
}

/// Rollout of the trained hybrid model over [0, horizon].
inline Trajectory forecast(const MlpParams& params, const InputNormalizer& norm,
                           const ScenarioConfig& cfg, const SolverSpec& spec, double horizon = 720.0) {
  if (horizon < cfg.train_horizon_hours) {
    throw ConfigError("forecast horizon must cover the training horizon");
  }
  return rollout(UdeSystem{cfg, params, norm, spec}, horizon);
}

struct Metrics {
  std::vector<double> rmse_per_node;
  double rmse_total = 0.0;
  double max_abs_err = 0.0;
};

inline Metrics evaluate(const Trajectory& pred, const Trajectory& truth) {
  detail::require_same_grid(pred, truth);
  if (pred.size() == 0) throw ShapeError("cannot evaluate empty trajectories");
  Metrics m;
  double total = 0.0;
  for (std::size_t i = 0; i < pred.n_nodes(); ++i) {
    double node_sum = 0.0;
    for (std::size_t k = 0; k < pred.size(); ++k) {
      const double d = pred.at(i, k) - truth.at(i, k);
      node_sum += d * d;
      m.max_abs_err = std::max(m.max_abs_err, std::abs(d));
    }
    total += node_sum;
    m.rmse_per_node.push_back(std::sqrt(node_sum / static_cast<double>(pred.size())));
  }
  m.rmse_total = std::sqrt(total / static_cast<double>(pred.size() * pred.n_nodes()));
  return m;
}

}  // namespace ude_grid
