// SPDX-License-Identifier: Apache-2.0
//
// Residual network NN(t, E): fully connected, tanh hidden layers, linear
// scalar head, with hand-written reverse mode.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "ude_grid/errors.hpp"

namespace ude_grid {

/// Flat parameter vector plus the layer shape it encodes.
///
/// Layout: layer by layer, weights then bias; weights are row-major with one
/// row per output neuron.
struct MlpParams {
  std::vector<std::size_t> layer_sizes{2, 16, 16, 1};
  std::vector<double> theta;

  static std::size_t count_for(std::span<const std::size_t> sizes) {
    std::size_t n = 0;
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) n += sizes[l + 1] * sizes[l] + sizes[l + 1];
    return n;
  }

  static void validate_shape(std::span<const std::size_t> sizes) {
    if (sizes.size() < 2) throw ShapeError("layer_sizes needs at least an input and an output layer");
    if (sizes.front() != 2) throw ShapeError("layer_sizes must start with 2 inputs (t, E)");
    if (sizes.back() != 1) throw ShapeError("layer_sizes must end with 1 output");
    for (std::size_t s : sizes) {
      if (s == 0) throw ShapeError("layer_sizes entries must be positive");
    }
  }

  std::size_t n_layers() const noexcept { return layer_sizes.size() - 1; }

  /// Offset of layer l's weight block within theta.
  std::size_t offset(std::size_t l) const {
    std::size_t off = 0;
    for (std::size_t i = 0; i < l; ++i) off += layer_sizes[i + 1] * layer_sizes[i] + layer_sizes[i + 1];
    return off;
  }

  void validate() const {
    validate_shape(layer_sizes);
    if (theta.size() != count_for(layer_sizes)) {
      throw ShapeError("theta has " + std::to_string(theta.size()) + " entries, layer_sizes require " +
                       std::to_string(count_for(layer_sizes)));
    }
    for (double v : theta) {
      if (!std::isfinite(v)) throw DomainError("theta contains a non-finite entry");
    }
  }

  static MlpParams zeros(std::vector<std::size_t> sizes = {2, 16, 16, 1}) {
    validate_shape(sizes);
    MlpParams p;
    p.theta.assign(count_for(sizes), 0.0);
    p.layer_sizes = std::move(sizes);
    return p;
  }
};

/// Scales applied to (t, E) before the first layer.
struct InputNormalizer {
  double t_scale = 240.0;
  double e_scale = 50.0;

  void validate() const {
    if (!(t_scale > 0.0) || !std::isfinite(t_scale)) throw ConfigError("t_scale must be finite and > 0");
    if (!(e_scale > 0.0) || !std::isfinite(e_scale)) throw ConfigError("e_scale must be finite and > 0");
  }
};

/// One dense layer unpacked from theta.
struct DenseLayer {
  std::size_t n_in = 0;
  std::size_t n_out = 0;
  std::vector<double> weights;  // n_out x n_in, row-major
  std::vector<double> bias;

  friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

inline std::vector<DenseLayer> unflatten(const MlpParams& params) {
  params.validate();
  std::vector<DenseLayer> layers;
  auto it = params.theta.begin();
  for (std::size_t l = 0; l < params.n_layers(); ++l) {
    DenseLayer layer;
    layer.n_in = params.layer_sizes[l];
    layer.n_out = params.layer_sizes[l + 1];
    layer.weights.assign(it, it + static_cast<std::ptrdiff_t>(layer.n_in * layer.n_out));
    it += static_cast<std::ptrdiff_t>(layer.n_in * layer.n_out);
    layer.bias.assign(it, it + static_cast<std::ptrdiff_t>(layer.n_out));
    it += static_cast<std::ptrdiff_t>(layer.n_out);
    layers.push_back(std::move(layer));
  }
  return layers;
}

inline MlpParams flatten(std::span<const DenseLayer> layers) {
  if (layers.empty()) throw ShapeError("no layers to flatten");
  MlpParams p;
  p.layer_sizes = {layers.front().n_in};
  p.theta.clear();
  for (const auto& layer : layers) {
    if (layer.n_in != p.layer_sizes.back()) throw ShapeError("consecutive layer sizes disagree");
    if (layer.weights.size() != layer.n_in * layer.n_out || layer.bias.size() != layer.n_out) {
      throw ShapeError("layer block sizes disagree with n_in/n_out");
    }
    p.layer_sizes.push_back(layer.n_out);
    p.theta.insert(p.theta.end(), layer.weights.begin(), layer.weights.end());
    p.theta.insert(p.theta.end(), layer.bias.begin(), layer.bias.end());
  }
  p.validate();
  return p;
}

/// Glorot-uniform weights, zero biases.
///
/// Uniform draws use the top 53 bits of mt19937_64 directly so the result
/// does not depend on the standard library's distribution implementation.
inline MlpParams init_params(std::uint64_t seed, std::vector<std::size_t> layer_sizes = {2, 16, 16, 1}) {
  MlpParams p = MlpParams::zeros(std::move(layer_sizes));
  std::mt19937_64 rng(seed);
  for (std::size_t l = 0; l < p.n_layers(); ++l) {
    const std::size_t n_in = p.layer_sizes[l];
    const std::size_t n_out = p.layer_sizes[l + 1];
    const double bound = std::sqrt(6.0 / static_cast<double>(n_in + n_out));
    const std::size_t off = p.offset(l);
    for (std::size_t w = 0; w < n_in * n_out; ++w) {
      const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
      p.theta[off + w] = (2.0 * u - 1.0) * bound;
    }
  }
  return p;
}

/// Scratch space for forward/backward; reuse it across calls to avoid
/// allocating in the integrator's inner loop.
struct MlpWorkspace {
  void reserve_for(const MlpParams& params) {
    const auto& sz = params.layer_sizes;
    if (acts.size() == sz.size() && std::equal(sz.begin(), sz.end(), shape.begin())) return;
    shape = sz;
    acts.resize(sz.size());
    for (std::size_t l = 0; l < sz.size(); ++l) acts[l].assign(sz[l], 0.0);
    std::size_t widest = 0;
    for (std::size_t s : sz) widest = std::max(widest, s);
    delta.assign(widest, 0.0);
    delta_prev.assign(widest, 0.0);
  }

  std::vector<std::size_t> shape;
  std::vector<std::vector<double>> acts;
  std::vector<double> delta;
  std::vector<double> delta_prev;
};

/// NN(t, E) evaluated with the caller's workspace; leaves the activations
/// in `ws` for a following backward pass.
inline double forward(const MlpParams& params, const InputNormalizer& norm, double t, double e,
                      MlpWorkspace& ws) {
  if (!std::isfinite(t) || !std::isfinite(e)) throw DomainError("network inputs must be finite");
  ws.reserve_for(params);
  const auto& sz = params.layer_sizes;
  const double* w = params.theta.data();
  ws.acts[0][0] = t / norm.t_scale;
  ws.acts[0][1] = e / norm.e_scale;
  const std::size_t n_layers = sz.size() - 1;
  for (std::size_t l = 0; l < n_layers; ++l) {
    const std::size_t n_in = sz[l];
    const std::size_t n_out = sz[l + 1];
    const double* in = ws.acts[l].data();
    double* out = ws.acts[l + 1].data();
    const double* bias = w + n_in * n_out;
    const bool hidden = l + 1 < n_layers;
    for (std::size_t o = 0; o < n_out; ++o) {
      double z = bias[o];
      const double* row = w + o * n_in;
      for (std::size_t i = 0; i < n_in; ++i) z += row[i] * in[i];
      out[o] = hidden ? std::tanh(z) : z;
    }
    w = bias + n_out;
  }
  return ws.acts.back()[0];
}

inline double forward(const MlpParams& params, const InputNormalizer& norm, double t, double e) {
  MlpWorkspace ws;
  return forward(params, norm, t, e, ws);
}

/// Adds upstream * dNN/dtheta into `grad_theta` and returns upstream * dNN/dE.
///
/// Runs its own forward pass, so `ws` need not hold matching activations.
inline double backward_accumulate(const MlpParams& params, const InputNormalizer& norm, double t,
                                  double e, double upstream, std::span<double> grad_theta,
                                  MlpWorkspace& ws) {
  if (grad_theta.size() != params.theta.size()) throw ShapeError("grad_theta length mismatch");
  forward(params, norm, t, e, ws);
  const auto& sz = params.layer_sizes;
  const std::size_t n_layers = sz.size() - 1;

  ws.delta[0] = upstream;
  for (std::size_t l = n_layers; l-- > 0;) {
    const std::size_t n_in = sz[l];
    const std::size_t n_out = sz[l + 1];
    const std::size_t off = params.offset(l);
    const double* w = params.theta.data() + off;
    double* gw = grad_theta.data() + off;
    double* gb = gw + n_in * n_out;
    const double* in = ws.acts[l].data();
    for (std::size_t i = 0; i < n_in; ++i) ws.delta_prev[i] = 0.0;
    for (std::size_t o = 0; o < n_out; ++o) {
      const double d = ws.delta[o];
      gb[o] += d;
      const double* row = w + o * n_in;
      double* grow = gw + o * n_in;
      for (std::size_t i = 0; i < n_in; ++i) {
        grow[i] += d * in[i];
        ws.delta_prev[i] += d * row[i];
      }
    }
    if (l > 0) {
      // in[] holds tanh outputs of the previous layer.
      for (std::size_t i = 0; i < n_in; ++i) ws.delta_prev[i] *= 1.0 - in[i] * in[i];
    }
    std::swap(ws.delta, ws.delta_prev);
  }
  return ws.delta[1] / norm.e_scale;
}

struct MlpGradient {
  std::vector<double> grad_theta;
  double grad_e = 0.0;
};

inline MlpGradient backward(const MlpParams& params, const InputNormalizer& norm, double t, double e,
                            double upstream) {
  MlpGradient g;
  g.grad_theta.assign(params.theta.size(), 0.0);
  MlpWorkspace ws;
  g.grad_e = backward_accumulate(params, norm, t, e, upstream, g.grad_theta, ws);
  return g;
}

}  // namespace ude_grid
