// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ude_grid {

/// Invalid configuration or argument value.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Non-finite or otherwise out-of-domain numeric input.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class IndexError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

/// Mismatched lengths, grids or layer shapes.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A state (or a training gradient) became non-finite.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(const std::string& what, std::size_t step, double time)
      : std::runtime_error(what), step_(step), time_(time) {}
  DivergenceError(std::size_t step, double time)
      : std::runtime_error("integration diverged at step " + std::to_string(step) +
                           " (t = " + std::to_string(time) + " h)"),
        step_(step),
        time_(time) {}

  /// Index of the first RK4 step whose result was non-finite.
  std::size_t step() const noexcept { return step_; }
  double time() const noexcept { return time_; }

 private:
  std::size_t step_;
  double time_;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace ude_grid
