// SPDX-License-Identifier: Apache-2.0
//
// ude_grid: synthetic smart-grid battery signals, physical simulation,
// UDE training and forecasting.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "ude_grid/commands.hpp"

namespace {

using namespace ude_grid;
namespace cli = ude_grid::cli;

struct Flags {
  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> iterations;
  std::optional<double> lr;
  std::optional<double> horizon;
  std::optional<double> step_hours;
  std::string checkpoint;
  std::string inject_residual;
  std::size_t checkpoint_every = 0;
  std::string pred_csv;
  std::string truth_csv;
};

RunConfig resolve(const Flags& f) {
  RunConfig rc = f.config_path.empty() ? RunConfig{} : load_run_config(f.config_path);
  if (f.seed) rc.seed = *f.seed;
  if (f.iterations) rc.iterations = *f.iterations;
  if (f.lr) rc.lr = *f.lr;
  if (f.step_hours) rc.solver.step_hours = *f.step_hours;
  if (!f.inject_residual.empty()) {
    const auto parts = csv::split_fields(f.inject_residual);
    if (parts.size() != 2) throw ConfigError("--inject-residual expects \"a,omega\"");
    try {
      rc.injection.amplitude = std::stod(parts[0]);
      rc.injection.omega = std::stod(parts[1]);
    } catch (const std::exception&) {
      throw ConfigError("--inject-residual expects two numbers \"a,omega\"");
    }
  }
  rc.validate();
  return rc;
}

std::string resolve_out(const Flags& f) {
  if (!f.out_dir.empty()) return f.out_dir;
  if (const char* env = std::getenv("UDE_GRID_OUT"); env != nullptr && *env != '\0') return env;
  return "ude_grid_out";
}

int dispatch(const std::string& command, const Flags& f) {
  const RunConfig rc = resolve(f);
  cli::OutputDir out(resolve_out(f), command, f.config_path, rc.seed);
  if (command == "signals") {
    cli::cmd_signals(rc, out);
  } else if (command == "truth") {
    cli::cmd_truth(rc, out);
  } else if (command == "train") {
    cli::cmd_train(rc, out, f.checkpoint_every);
  } else if (command == "forecast") {
    if (f.checkpoint.empty()) throw ConfigError("forecast requires --checkpoint");
    const double horizon = f.horizon.value_or(rc.scenario.forecast_horizon_hours);
    cli::cmd_forecast(cli::read_checkpoint(f.checkpoint), rc, out, horizon);
  } else if (command == "eval") {
    if (!f.pred_csv.empty() || !f.truth_csv.empty()) {
      if (f.pred_csv.empty() || f.truth_csv.empty()) {
        throw ConfigError("eval needs both --pred and --truth");
      }
      cli::cmd_eval_files(f.pred_csv, f.truth_csv, out);
    } else {
      if (f.checkpoint.empty()) throw ConfigError("eval requires --checkpoint or --pred/--truth");
      cli::cmd_eval(cli::read_checkpoint(f.checkpoint), rc, out);
    }
  }
  out.finish();
  for (const auto& name : out.files()) std::cout << (out.path() / name).string() << '\n';
  std::cout << (out.path() / "manifest.json").string() << '\n';
  return cli::kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Universal differential equation model of per-node battery energy in a small grid.\n"
      "Units are dimensionless; time is in hours. Day d spans hours [24(d-1), 24d],\n"
      "so the day-6 slice written by `signals` covers hours 120-144 inclusive."};
  app.require_subcommand(1);
  Flags f;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", f.config_path, "JSON run configuration")->check(CLI::ExistingFile);
    sub->add_option("--out", f.out_dir, "Output directory (default: $UDE_GRID_OUT or ./ude_grid_out)");
    sub->add_option("--step-hours", f.step_hours, "RK4 step in hours (default 0.25)");
    sub->add_option("--inject-residual", f.inject_residual,
                    "Add a*sin(omega*t) to the truth dynamics, given as \"a,omega\"");
  };

  auto* signals = app.add_subcommand("signals", "Solar/load signals over the training window and day 6");
  add_common(signals);
  auto* truth = app.add_subcommand("truth", "Physical-model battery trajectories");
  add_common(truth);
  auto* train = app.add_subcommand("train", "Train the neural residual with ADAM");
  add_common(train);
  train->add_option("--seed", f.seed, "Initialization seed (default 0)");
  train->add_option("--iterations", f.iterations, "ADAM iterations (default 300)");
  train->add_option("--lr", f.lr, "Learning rate (default 0.005)");
  train->add_option("--checkpoint-every", f.checkpoint_every, "Also write a checkpoint every N iterations");
  auto* fc = app.add_subcommand("forecast", "Roll a trained checkpoint out over a long horizon");
  add_common(fc);
  fc->add_option("--checkpoint", f.checkpoint, "Checkpoint JSON from `train`")->check(CLI::ExistingFile);
  fc->add_option("--horizon", f.horizon, "Forecast horizon in hours (default 720)");
  auto* ev = app.add_subcommand("eval", "Metrics of a checkpoint, or of two trajectory CSVs");
  add_common(ev);
  ev->add_option("--checkpoint", f.checkpoint, "Checkpoint JSON from `train`")->check(CLI::ExistingFile);
  ev->add_option("--pred", f.pred_csv, "Predicted trajectory CSV")->check(CLI::ExistingFile);
  ev->add_option("--truth", f.truth_csv, "Reference trajectory CSV")->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? cli::kOk : cli::kUsage;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    return dispatch(command, f);
  } catch (const DivergenceError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return cli::kDivergence;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return cli::kIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return cli::kUsage;
  }
}
