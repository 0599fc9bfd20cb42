// SPDX-License-Identifier: Apache-2.0
//
// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "ude_grid/commands.hpp"
#include "ude_grid/ude_grid.hpp"

using namespace ude_grid;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

double max_abs_diff(const Trajectory& a, const Trajectory& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.n_nodes(); ++i) {
    for (std::size_t k = 0; k < a.size(); ++k) m = std::max(m, std::abs(a.at(i, k) - b.at(i, k)));
  }
  return m;
}

bool all_finite(const Trajectory& t) {
  return std::all_of(t.states().begin(), t.states().end(), [](double v) { return std::isfinite(v); });
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::vector<double>> numeric_rows(const fs::path& p, std::size_t* n_cols) {
  std::ifstream in(p);
  std::string line;
  std::getline(in, line);
  *n_cols = csv::split_fields(line).size();
  std::vector<std::vector<double>> out;
  while (std::getline(in, line)) {
    std::vector<double> row;
    for (const auto& f : csv::split_fields(line)) row.push_back(csv::parse_double(f));
    out.push_back(std::move(row));
  }
  return out;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("ude_grid_acceptance_" + name);
  fs::remove_all(p);
  return p;
}

// 1. Adjoint gradient vs central finite differences.
Outcome gradient_exactness() {
  const auto t0 = std::chrono::steady_clock::now();
  ScenarioConfig cfg;
  cfg.train_horizon_hours = 24.0;
  const UdeSystem sys{cfg, init_params(0), InputNormalizer{}, SolverSpec{}};
  const Trajectory truth = simulate_truth(cfg, sys.spec, 24.0);
  const LossReport r = loss_and_grad(sys, truth);
  const std::vector<double> fd = finite_difference_grad(sys, truth, 1e-5);
  std::size_t bad = 0;
  double worst_rel = 0.0;
  double worst_abs = 0.0;
  for (std::size_t j = 0; j < fd.size(); ++j) {
    const double err = std::abs(fd[j] - r.grad_theta[j]);
    worst_abs = std::max(worst_abs, err);
    const bool ok = err <= 1e-7 || err <= 1e-4 * std::abs(fd[j]);
    if (!ok) ++bad;
    if (err > 1e-7) worst_rel = std::max(worst_rel, err / std::abs(fd[j]));
  }
  const double secs = seconds_since(t0);
  return {bad == 0 && fd.size() == 337 && secs < 30.0,
          std::to_string(fd.size()) + " components, " + std::to_string(bad) + " outside tolerance, " +
              fmt("worst abs err %.2e", worst_abs) +
              fmt(", worst rel err above abs floor %.2e", worst_rel) + fmt(", %.2f s", secs)};
}

// 2. RK4 order on the default scenario and exactness on constant fields.
Outcome solver_order() {
  const ScenarioConfig cfg;
  std::vector<double> ratios;
  for (double h : {0.5, 0.25}) {
    const Trajectory ref = simulate_truth(cfg, SolverSpec{h / 8.0}, 240.0);
    const double e1 = max_abs_diff(simulate_truth(cfg, SolverSpec{h}, 240.0), ref);
    const double e2 = max_abs_diff(simulate_truth(cfg, SolverSpec{h / 2.0}, 240.0), ref);
    ratios.push_back(e1 / e2);
  }
  bool pass = std::all_of(ratios.begin(), ratios.end(), [](double q) { return q >= 12.0 && q <= 20.0; });

  const double c = -0.3719;
  const std::vector<double> y0{0.0};
  auto rhs = [c](double, std::span<const double>, std::span<double> dy) { dy[0] = c; };
  const Trajectory tr = integrate(rhs, y0, 0.0, 720.0, SolverSpec{}, 1.0);
  double worst = 0.0;
  for (std::size_t k = 1; k < tr.size(); ++k) {
    worst = std::max(worst, std::abs(tr.at(0, k) - c * tr.time(k)) / std::abs(c * tr.time(k)));
  }
  pass = pass && worst <= 1e-12;
  return {pass, fmt("halving ratios %.2f", ratios[0]) + fmt(", %.2f", ratios[1]) +
                    fmt("; constant-field max rel err %.1e", worst)};
}

// 3. Zero network reproduces the physical model exactly.
Outcome zero_residual() {
  const ScenarioConfig cfg;
  const UdeSystem sys{cfg, MlpParams::zeros(), InputNormalizer{}, SolverSpec{}};
  const Trajectory truth = simulate_truth(cfg, sys.spec, 240.0);
  const bool identical = rollout(sys, 240.0) == truth;
  const LossReport r = loss_and_grad(sys, truth);
  double gmax = 0.0;
  for (double g : r.grad_theta) gmax = std::max(gmax, std::abs(g));
  return {identical && r.loss == 0.0 && gmax == 0.0,
          std::string(identical ? "rollout bit-identical" : "rollout differs") + fmt(", loss %g", r.loss) +
              fmt(", |grad|inf %g", gmax)};
}

// 4. Reference training run.
Outcome training_convergence() {
  const TrainResult r = train(ScenarioConfig{}, SolverSpec{}, 0, 300, 0.005);
  const auto& h = r.report.loss_history;
  const bool finite = std::all_of(h.begin(), h.end(), [](double v) { return std::isfinite(v); });
  const double ratio = h.back() / h.front();
  return {finite && h.size() == 300 && ratio <= 0.01 && r.report.wall_time_seconds < 120.0,
          fmt("initial %.4g", h.front()) + fmt(", final %.4g", h.back()) + fmt(", ratio %.2e", ratio) +
              fmt(", %.1f s", r.report.wall_time_seconds)};
}

// 5. Learning a known nonzero residual.
Outcome residual_learning() {
  const ScenarioConfig cfg;
  const SolverSpec spec;
  TrainOptions opts;
  opts.injection = ResidualInjection{0.05, 0.2};
  const Trajectory truth = simulate_truth(cfg, spec, cfg.train_horizon_hours, opts.injection);
  const double baseline =
      evaluate(rollout(UdeSystem{cfg, MlpParams::zeros(), opts.norm, spec}, 240.0), truth).rmse_total;
  const TrainResult r = train(cfg, spec, 0, 300, 0.005, opts);
  const double trained =
      evaluate(rollout(UdeSystem{cfg, r.params, opts.norm, spec}, 240.0), truth).rmse_total;
  const double factor = baseline / trained;
  return {factor >= 10.0, fmt("baseline RMSE %.4f", baseline) + fmt(", trained RMSE %.4f", trained) +
                              fmt(", reduction %.2fx (need >= 10x)", factor)};
}

// 6. 720-hour forecast of a model trained without load noise.
Outcome forecast_stability() {
  ScenarioConfig cfg;
  cfg.load_noise_amp = 0.0;
  const SolverSpec spec;
  const InputNormalizer norm;
  const TrainResult r = train(cfg, spec, 0, 300, 0.005);
  const Trajectory fc = forecast(r.params, norm, cfg, spec, 720.0);
  const Trajectory truth = simulate_truth(cfg, spec, 720.0);
  const bool finite = all_finite(fc) && fc.size() == 721;
  std::size_t order_violations = 0;
  for (std::size_t k = 1; k < fc.size(); ++k) {
    if (!(fc.at(0, k) > fc.at(1, k) && fc.at(1, k) > fc.at(2, k))) ++order_violations;
  }
  const double train_rmse = evaluate(fc.slice(0.0, 240.0), truth.slice(0.0, 240.0)).rmse_total;
  const double future_rmse = evaluate(fc.slice(240.0, 720.0), truth.slice(240.0, 720.0)).rmse_total;
  const double ratio = future_rmse / train_rmse;
  return {finite && order_violations == 0 && ratio <= 5.0,
          std::string(finite ? "finite" : "NON-FINITE") + ", ordering violations " +
              std::to_string(order_violations) + fmt(", RMSE train %.4f", train_rmse) +
              fmt(" / forecast %.4f", future_rmse) + fmt(" = %.1fx (need <= 5x)", ratio)};
}

// 7. Base-load ordering of the physical model.
Outcome node_sensitivity() {
  ScenarioConfig cfg;
  cfg.load_noise_amp = 0.0;
  const Trajectory tr = simulate_truth(cfg, SolverSpec{}, 240.0);
  const double e0 = tr.at(0, 240), e1 = tr.at(1, 240), e2 = tr.at(2, 240);
  const double g01 = e0 - e1, g12 = e1 - e2;
  // Loads differ by the constant 0.05, whose integral over 240 h is 12.
  const bool pass = e0 > e1 && e1 > e2 && std::abs(g01 - 12.0) <= 1e-6 && std::abs(g12 - 12.0) <= 1e-6;
  return {pass, fmt("E(240) = %.6f", e0) + fmt(", %.6f", e1) + fmt(", %.6f", e2) +
                    fmt("; gaps %.9f", g01) + fmt(", %.9f", g12)};
}

// 8. Two identical `train` invocations give identical bytes.
Outcome determinism() {
  const fs::path a = scratch("det_a");
  const fs::path b = scratch("det_b");
  for (const auto& dir : {a, b}) {
    cli::OutputDir out(dir, "train", "", 0);
    cli::cmd_train(RunConfig{}, out);
    out.finish();
  }
  std::vector<std::string> differing;
  for (const char* f : {"checkpoint.json", "loss_history.csv", "train_vs_truth.csv", "metrics.json"}) {
    const std::string x = slurp(a / f);
    if (x.empty() || x != slurp(b / f)) differing.emplace_back(f);
  }
  std::string detail = differing.empty() ? "checkpoint, loss history, CSVs and metrics byte-identical"
                                         : "differing:";
  for (const auto& f : differing) detail += " " + f;
  return {differing.empty(), detail};
}

// 9. Shape checks on the emitted signal and truth CSVs.
Outcome figure_shapes() {
  std::vector<std::string> problems;
  const fs::path dir = scratch("figures");
  {
    cli::OutputDir out(dir, "signals", "", 0);
    cli::cmd_signals(RunConfig{}, out);
    cli::cmd_truth(RunConfig{}, out);
    out.finish();
  }
  std::size_t cols = 0;
  const auto sig = numeric_rows(dir / "signals.csv", &cols);
  if (sig.size() != 241 || cols != 5) problems.push_back("signals.csv shape");
  const auto day = numeric_rows(dir / "signals_day6.csv", &cols);
  if (day.size() != 25 || cols != 5 || day.front()[0] != 120.0 || day.back()[0] != 144.0) {
    problems.push_back("signals_day6.csv shape");
  }
  const auto truth = numeric_rows(dir / "truth.csv", &cols);
  if (truth.size() != 241 || cols != 4) problems.push_back("truth.csv shape");

  // Noise-free signals repeat every 24 rows.
  RunConfig quiet;
  quiet.scenario.solar_noise_amp = 0.0;
  quiet.scenario.load_noise_amp = 0.0;
  const fs::path qdir = scratch("figures_quiet");
  {
    cli::OutputDir out(qdir, "signals", "", 0);
    cli::cmd_signals(quiet, out);
  }
  const auto qsig = numeric_rows(qdir / "signals.csv", &cols);
  std::size_t periodic_bad = 0;
  for (std::size_t k = 0; k + 24 < qsig.size(); ++k) {
    for (std::size_t c = 1; c < qsig[k].size(); ++c) {
      if (qsig[k][c] != qsig[k + 24][c]) ++periodic_bad;
    }
  }
  if (periodic_bad != 0) problems.push_back("noise-free periodicity");

  // Staircase: hours where solar beats load on a 0.01 h grid must rise.
  const ScenarioConfig cfg;
  std::size_t rises = 0, stair_bad = 0;
  for (std::size_t node = 0; node < 3; ++node) {
    for (std::size_t k = 0; k + 1 < truth.size(); ++k) {
      bool surplus = true;
      for (int s = 0; s <= 100 && surplus; ++s) surplus = net_power(node, truth[k][0] + 0.01 * s, cfg) > 0.0;
      if (!surplus) continue;
      ++rises;
      if (!(truth[k + 1][1 + node] > truth[k][1 + node])) ++stair_bad;
    }
  }
  if (stair_bad != 0 || rises == 0) problems.push_back("staircase monotonicity");

  std::string detail = "signals 241x5, day6 25x5, truth 241x4; " + std::to_string(rises) +
                       " surplus hours checked";
  for (const auto& p : problems) detail += "; FAILED " + p;
  return {problems.empty(), detail};
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria{
      {"AC1 gradient exactness (adjoint vs finite differences)", gradient_exactness},
      {"AC2 solver order and constant-field exactness", solver_order},
      {"AC3 zero-residual fixed point", zero_residual},
      {"AC4 training convergence (300 iters, lr 0.005)", training_convergence},
      {"AC5 residual learning with injected a=0.05, omega=0.2", residual_learning},
      {"AC6 720 h forecast stability", forecast_stability},
      {"AC7 node sensitivity to base load", node_sensitivity},
      {"AC8 determinism of train artifacts", determinism},
      {"AC9 figure-shape reproduction", figure_shapes},
  };

  int failures = 0;
  for (const auto& c : criteria) {
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::printf("[%s] %s: %s\n", o.pass ? "PASS" : "FAIL", c.name, o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
