// SPDX-License-Identifier: Apache-2.0
//
// Pipeline commands behind the `ude_grid` executable. Each command writes
// its CSV/JSON artifacts plus gnuplot scripts into an output directory and
// finishes with a manifest listing every file with its SHA-256.
#pragma once

#include <openssl/evp.h>

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "ude_grid/dynamics.hpp"
#include "ude_grid/errors.hpp"
#include "ude_grid/io.hpp"
#include "ude_grid/signals.hpp"
#include "ude_grid/trainer.hpp"
#include "ude_grid/ude.hpp"

namespace ude_grid::cli {

namespace fs = std::filesystem;

/// Process exit codes.
enum ExitCode : int { kOk = 0, kUsage = 1, kDivergence = 2, kIo = 3 };

/// Hours covered by the single-day slice: day d (1-based) spans
/// [24(d-1), 24d], so day 6 is hours 120..144 inclusive.
inline constexpr double kDaySliceFrom = 120.0;
inline constexpr double kDaySliceTo = 144.0;

inline std::string sha256_hex(const std::string& data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw IoError("SHA-256 computation failed");
  }
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 0xf];
  }
  return out;
}

inline std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// Collects the files a command emits, then writes manifest.json last.
class OutputDir {
 public:
  OutputDir(fs::path dir, std::string command, std::string config_path, std::uint64_t seed)
      : dir_(std::move(dir)),
        command_(std::move(command)),
        config_path_(std::move(config_path)),
        seed_(seed),
        started_(utc_timestamp()) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec || !fs::is_directory(dir_)) {
      throw IoError("cannot create output directory '" + dir_.string() + "'");
    }
  }

  const fs::path& path() const noexcept { return dir_; }
  const std::vector<std::string>& files() const noexcept { return names_; }

  void write(const std::string& name, const std::string& content) {
    const fs::path p = dir_ / name;
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out << content;
    out.close();
    if (!out) throw IoError("cannot write '" + p.string() + "'");
    for (std::size_t i = 0; i < names_.size(); ++i) {
      if (names_[i] == name) {
        sums_[i] = sha256_hex(content);
        return;
      }
    }
    names_.push_back(name);
    sums_.push_back(sha256_hex(content));
  }

  void write_json(const std::string& name, const nlohmann::json& j) { write(name, j.dump(2) + "\n"); }

  void finish() {
    nlohmann::json m;
    m["command"] = command_;
    m["config_path"] = config_path_;
    m["output_dir"] = dir_.string();
    m["seed"] = seed_;
    m["timestamps"] = {{"started", started_}, {"finished", utc_timestamp()}};
    nlohmann::json arts = nlohmann::json::array();
    for (std::size_t i = 0; i < names_.size(); ++i) {
      arts.push_back({{"file", names_[i]}, {"sha256", sums_[i]}});
    }
    m["artifacts"] = arts;
    const fs::path p = dir_ / "manifest.json";
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out << m.dump(2) << "\n";
    out.close();
    if (!out) throw IoError("cannot write '" + p.string() + "'");
  }

 private:
  fs::path dir_;
  std::string command_;
  std::string config_path_;
  std::uint64_t seed_;
  std::string started_;
  std::vector<std::string> names_;
  std::vector<std::string> sums_;
};

namespace detail {

inline std::string trajectory_csv(const Trajectory& traj) {
  std::ostringstream os;
  write_trajectory_csv(os, traj);
  return os.str();
}

/// `t,pred_node0..,truth_node0..` on the shared grid.
inline std::string paired_csv(const Trajectory& pred, const Trajectory& truth) {
  ude_grid::detail::require_same_grid(pred, truth);
  std::ostringstream os;
  os << 't';
  for (std::size_t i = 0; i < pred.n_nodes(); ++i) os << ",pred_node" << i;
  for (std::size_t i = 0; i < truth.n_nodes(); ++i) os << ",truth_node" << i;
  os << '\n';
  for (std::size_t k = 0; k < pred.size(); ++k) {
    os << csv::format_double(pred.time(k));
    for (std::size_t i = 0; i < pred.n_nodes(); ++i) os << ',' << csv::format_double(pred.at(i, k));
    for (std::size_t i = 0; i < truth.n_nodes(); ++i) os << ',' << csv::format_double(truth.at(i, k));
    os << '\n';
  }
  return os.str();
}

inline std::string signals_csv(const ScenarioConfig& cfg, double from, double to) {
  std::ostringstream os;
  os << "t,solar";
  for (std::size_t i = 0; i < cfg.n_nodes; ++i) os << ",load" << i;
  os << '\n';
  const double dt = cfg.sample_interval_hours;
  const auto first = static_cast<std::size_t>(std::llround(from / dt));
  const auto last = static_cast<std::size_t>(std::llround(to / dt));
  for (std::size_t k = first; k <= last; ++k) {
    const double t = static_cast<double>(k) * dt;
    os << csv::format_double(t) << ',' << csv::format_double(solar_power(t, cfg));
    for (std::size_t i = 0; i < cfg.n_nodes; ++i) os << ',' << csv::format_double(load_demand(i, t, cfg));
    os << '\n';
  }
  return os.str();
}

/// gnuplot script plotting columns 2..n_columns of `csv_name` against t.
inline std::string plot_script(const std::string& csv_name, const std::string& title,
                               const std::string& ylabel, std::size_t n_columns, bool log_y = false) {
  std::ostringstream os;
  os << "# gnuplot script; render with: gnuplot " << csv_name.substr(0, csv_name.rfind('.')) << ".gp\n"
     << "set datafile separator ','\n"
     << "set key autotitle columnhead outside\n"
     << "set terminal pngcairo size 1000,500\n"
     << "set output '" << csv_name.substr(0, csv_name.rfind('.')) << ".png'\n"
     << "set title '" << title << "'\n"
     << "set xlabel '" << (log_y ? "iteration" : "time (h)") << "'\n"
     << "set ylabel '" << ylabel << "'\n";
  if (log_y) os << "set logscale y\n";
  os << "plot for [c=2:" << n_columns << "] '" << csv_name << "' using 1:c with lines\n";
  return os.str();
}

inline nlohmann::json window_metrics(const Trajectory& pred, const Trajectory& truth, double from,
                                     double to) {
  return to_json(evaluate(pred.slice(from, to), truth.slice(from, to)));
}

}  // namespace detail

/// Solar and load signals over the training horizon and the day-6 slice.
inline void cmd_signals(const RunConfig& rc, OutputDir& out) {
  const auto& cfg = rc.scenario;
  const std::size_t cols = 2 + cfg.n_nodes;
  out.write("signals.csv", detail::signals_csv(cfg, 0.0, cfg.train_horizon_hours));
  out.write("signals.gp", detail::plot_script("signals.csv", "Solar and load demand", "power", cols));
  out.write("signals_day6.csv", detail::signals_csv(cfg, kDaySliceFrom, kDaySliceTo));
  out.write("signals_day6.gp",
            detail::plot_script("signals_day6.csv", "Solar and load demand, day 6", "power", cols));
}

/// Physical-model trajectories over the training horizon.
inline void cmd_truth(const RunConfig& rc, OutputDir& out) {
  const auto& cfg = rc.scenario;
  const Trajectory truth = simulate_truth(cfg, rc.solver, cfg.train_horizon_hours, rc.injection);
  out.write("truth.csv", detail::trajectory_csv(truth));
  out.write("truth.gp", detail::plot_script("truth.csv", "Ground-truth battery state", "energy",
                                            1 + cfg.n_nodes));
}

/// Trains the residual network and writes checkpoint, loss history,
/// prediction-vs-truth data and metrics. A divergence still writes the
/// partial loss history before propagating.
inline void cmd_train(const RunConfig& rc, OutputDir& out, std::size_t checkpoint_every = 0) {
  const auto& cfg = rc.scenario;
  const InputNormalizer norm = rc.normalizer();
  TrainOptions opts;
  opts.layer_sizes = rc.layer_sizes;
  opts.norm = norm;
  opts.injection = rc.injection;
  if (checkpoint_every > 0) {
    opts.on_iteration = [&](std::size_t it, const MlpParams& params) {
      if ((it + 1) % checkpoint_every != 0) return;
      out.write_json("checkpoint_iter" + std::to_string(it + 1) + ".json",
                     to_json(Checkpoint{params, norm, rc.seed, it + 1}));
    };
  }

  TrainResult result;
  try {
    result = train(cfg, rc.solver, rc.seed, rc.iterations, rc.lr, opts);
  } catch (const TrainingDiverged& err) {
    std::ostringstream loss_csv;
    write_loss_csv(loss_csv, err.partial_report().loss_history);
    out.write("loss_history.csv", loss_csv.str());
    out.write_json("train_report.json", to_json(err.partial_report()));
    out.finish();
    throw;
  }

  out.write_json("checkpoint.json", to_json(Checkpoint{result.params, norm, rc.seed, rc.iterations}));
  std::ostringstream loss_csv;
  write_loss_csv(loss_csv, result.report.loss_history);
  out.write("loss_history.csv", loss_csv.str());
  out.write("loss_history.gp",
            detail::plot_script("loss_history.csv", "Training loss", "loss", 2, /*log_y=*/true));

  const Trajectory truth = simulate_truth(cfg, rc.solver, cfg.train_horizon_hours, rc.injection);
  const Trajectory pred = rollout(UdeSystem{cfg, result.params, norm, rc.solver}, cfg.train_horizon_hours);
  out.write("train_vs_truth.csv", detail::paired_csv(pred, truth));
  out.write("train_vs_truth.gp", detail::plot_script("train_vs_truth.csv", "Trained UDE vs truth",
                                                     "energy", 1 + 2 * cfg.n_nodes));
  out.write_json("metrics.json", to_json(evaluate(pred, truth)));
  // Wall time varies run to run, so the report is kept apart from the
  // byte-reproducible artifacts above.
  out.write_json("train_report.json", to_json(result.report));
}

inline Checkpoint read_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open checkpoint '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("checkpoint '" + path + "' is not valid JSON: " + e.what());
  }
  return checkpoint_from_json(j);
}

/// Rollout of a checkpoint over [0, horizon] next to the physical truth.
inline void cmd_forecast(const Checkpoint& ck, const RunConfig& rc, OutputDir& out, double horizon) {
  check_compatible(ck, rc);
  const auto& cfg = rc.scenario;
  const Trajectory pred = forecast(ck.params, ck.norm, cfg, rc.solver, horizon);
  const Trajectory truth = simulate_truth(cfg, rc.solver, horizon, rc.injection);
  out.write("forecast.csv", detail::paired_csv(pred, truth));
  out.write("forecast.gp", detail::plot_script("forecast.csv", "Battery forecast", "energy",
                                               1 + 2 * cfg.n_nodes));
  nlohmann::json m;
  m["full"] = to_json(evaluate(pred, truth));
  m["train_window"] = detail::window_metrics(pred, truth, 0.0, cfg.train_horizon_hours);
  if (horizon > cfg.train_horizon_hours) {
    m["forecast_window"] = detail::window_metrics(pred, truth, cfg.train_horizon_hours, horizon);
  }
  out.write_json("forecast_metrics.json", m);
}

/// Metrics for a checkpoint over the training window.
inline void cmd_eval(const Checkpoint& ck, const RunConfig& rc, OutputDir& out) {
  check_compatible(ck, rc);
  const auto& cfg = rc.scenario;
  const Trajectory pred =
      rollout(UdeSystem{cfg, ck.params, ck.norm, rc.solver}, cfg.train_horizon_hours);
  const Trajectory truth = simulate_truth(cfg, rc.solver, cfg.train_horizon_hours, rc.injection);
  out.write_json("eval_metrics.json", to_json(evaluate(pred, truth)));
}

inline Trajectory read_trajectory_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open trajectory CSV '" + path + "'");
  return read_trajectory_csv(in);
}

/// Metrics between two trajectory CSVs on the same grid.
inline void cmd_eval_files(const std::string& pred_path, const std::string& truth_path, OutputDir& out) {
  out.write_json("eval_metrics.json",
                 to_json(evaluate(read_trajectory_file(pred_path), read_trajectory_file(truth_path))));
}

}  // namespace ude_grid::cli
