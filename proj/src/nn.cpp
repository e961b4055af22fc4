// Copyright 2026 The ebst Authors
// SPDX-License-Identifier: Apache-2.0

#include "ebst/nn.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ebst/error.hpp"
#include "ebst/rng.hpp"

namespace ebst {
namespace {

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

std::vector<Layer> shaped_layers(std::span<const int> dims) {
  if (dims.size() < 2) throw ConfigError("model needs at least input and output dimensions");
  std::vector<Layer> layers;
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    if (dims[i] <= 0 || dims[i + 1] <= 0) throw ConfigError("layer dimensions must be positive");
    Layer l;
    l.in = dims[i];
    l.out = dims[i + 1];
    l.weight.assign(static_cast<std::size_t>(l.in) * l.out, 0.0);
    l.bias.assign(static_cast<std::size_t>(l.out), 0.0);
    layers.push_back(std::move(l));
  }
  return layers;
}

// Scalar at `flat_index`, counting weights then bias per layer.
template <typename Layers>
auto& flat_ref(Layers& layers, std::size_t flat_index) {
  for (auto& l : layers) {
    if (flat_index < l.weight.size()) return l.weight[flat_index];
    flat_index -= l.weight.size();
    if (flat_index < l.bias.size()) return l.bias[flat_index];
    flat_index -= l.bias.size();
  }
  throw ContractViolation("flat parameter index out of range");
}

}  // namespace

ModelParams::ModelParams(std::vector<Layer> layers) : layers_(std::move(layers)) {
  if (layers_.empty()) throw ConfigError("model has no layers");
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const Layer& l = layers_[i];
    if (l.in <= 0 || l.out <= 0) throw ConfigError("layer " + std::to_string(i) + " has empty shape");
    if (l.weight.size() != static_cast<std::size_t>(l.in) * l.out ||
        l.bias.size() != static_cast<std::size_t>(l.out))
      throw ConfigError("layer " + std::to_string(i) + " storage does not match its shape");
    if (i > 0 && layers_[i - 1].out != l.in)
      throw ConfigError("layer " + std::to_string(i) + " input does not chain with previous output");
    if (!all_finite(l.weight) || !all_finite(l.bias))
      throw ConfigError("layer " + std::to_string(i) + " has non-finite entries");
  }
}

ModelParams ModelParams::glorot(std::span<const int> dims, std::uint64_t seed) {
  auto layers = shaped_layers(dims);
  Rng rng(seed);
  for (auto& l : layers) {
    const double a = std::sqrt(6.0 / (l.in + l.out));
    for (auto& w : l.weight) w = rng.uniform(-a, a);
  }
  return ModelParams(std::move(layers));
}

ModelParams ModelParams::zeros(std::span<const int> dims) {
  return ModelParams(shaped_layers(dims));
}

std::size_t ModelParams::size() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += l.weight.size() + l.bias.size();
  return n;
}

double ModelParams::get(std::size_t flat_index) const { return flat_ref(layers_, flat_index); }
void ModelParams::set(std::size_t flat_index, double value) { flat_ref(layers_, flat_index) = value; }

GradientSet GradientSet::zeros_like(const ModelParams& params) {
  GradientSet g;
  g.layers.reserve(params.num_layers());
  for (const auto& l : params.layers()) {
    Layer z;
    z.in = l.in;
    z.out = l.out;
    z.weight.assign(l.weight.size(), 0.0);
    z.bias.assign(l.bias.size(), 0.0);
    g.layers.push_back(std::move(z));
  }
  return g;
}

double GradientSet::get(std::size_t flat_index) const { return flat_ref(layers, flat_index); }

bool GradientSet::all_zero() const {
  for (const auto& l : layers) {
    for (double v : l.weight)
      if (v != 0.0) return false;
    for (double v : l.bias)
      if (v != 0.0) return false;
  }
  return true;
}

ForwardTrace forward_trace(const ModelParams& params, std::span<const double> x) {
  if (static_cast<int>(x.size()) != params.input_dim())
    throw ConfigError("input has dimension " + std::to_string(x.size()) + ", model expects " +
                      std::to_string(params.input_dim()));
  if (!all_finite(x)) throw NumericalError("non-finite input", 0);

  ForwardTrace trace;
  trace.activations.reserve(params.num_layers() + 1);
  trace.activations.emplace_back(x.begin(), x.end());
  const auto& layers = params.layers();
  for (std::size_t li = 0; li < layers.size(); ++li) {
    const Layer& l = layers[li];
    const auto& in = trace.activations.back();
    std::vector<double> out(l.bias);
    for (int r = 0; r < l.out; ++r) {
      double acc = out[r];
      for (int c = 0; c < l.in; ++c) acc += l.w(r, c) * in[c];
      out[r] = acc;
    }
    const bool hidden = li + 1 < layers.size();
    if (hidden)
      for (auto& v : out) v = std::tanh(v);
    if (!all_finite(out)) throw NumericalError("non-finite activation", static_cast<int>(li));
    trace.activations.push_back(std::move(out));
  }
  return trace;
}

Logits mlp_forward(const ModelParams& params, std::span<const double> x) {
  auto trace = forward_trace(params, x);
  return std::move(trace.activations.back());
}

void backprop(const ModelParams& params, const ForwardTrace& trace,
              std::span<const double> logit_grad, GradientSet& grads,
              std::vector<double>* input_grad) {
  const auto& layers = params.layers();
  std::vector<double> delta(logit_grad.begin(), logit_grad.end());
  for (std::size_t li = layers.size(); li-- > 0;) {
    const Layer& l = layers[li];
    Layer& g = grads.layers[li];
    const auto& in = trace.activations[li];
    if (!all_finite(delta)) throw NumericalError("non-finite gradient", static_cast<int>(li));
    for (int r = 0; r < l.out; ++r) {
      const double d = delta[r];
      g.bias[r] += d;
      for (int c = 0; c < l.in; ++c) g.w(r, c) += d * in[c];
    }
    if (li == 0 && input_grad == nullptr) break;
    std::vector<double> prev(static_cast<std::size_t>(l.in), 0.0);
    for (int r = 0; r < l.out; ++r) {
      const double d = delta[r];
      for (int c = 0; c < l.in; ++c) prev[c] += l.w(r, c) * d;
    }
    if (li > 0) {
      // `in` is tanh output of the layer below: d tanh = 1 - a^2.
      for (int c = 0; c < l.in; ++c) prev[c] *= 1.0 - in[c] * in[c];
    }
    delta = std::move(prev);
  }
  if (input_grad != nullptr) *input_grad = std::move(delta);
}

double log_sum_exp(std::span<const double> z) {
  const double m = *std::max_element(z.begin(), z.end());
  double s = 0.0;
  for (double v : z) s += std::exp(v - m);
  return m + std::log(s);
}

ProbVector softmax(std::span<const double> z) {
  const double m = *std::max_element(z.begin(), z.end());
  ProbVector p(z.size());
  double s = 0.0;
  for (std::size_t k = 0; k < z.size(); ++k) {
    p[k] = std::exp(z[k] - m);
    s += p[k];
  }
  for (auto& v : p) v /= s;
  return p;
}

CrossEntropy cross_entropy(std::span<const double> p, std::span<const double> y) {
  if (p.size() != y.size()) throw ContractViolation("cross_entropy: length mismatch");
  CrossEntropy ce;
  for (std::size_t k = 0; k < p.size(); ++k) {
    if (y[k] == 0.0) continue;
    double pk = p[k];
    if (pk < kProbFloor) {
      pk = kProbFloor;
      ce.clamped = true;
    }
    ce.value -= y[k] * std::log(pk);
  }
  return ce;
}

LossAndGrad backward(const ModelParams& params, const std::vector<std::vector<double>>& batch,
                     const SampleLoss& loss) {
  LossAndGrad out{0.0, GradientSet::zeros_like(params)};
  std::vector<double> dz(static_cast<std::size_t>(params.num_classes()));
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto trace = forward_trace(params, batch[i]);
    std::fill(dz.begin(), dz.end(), 0.0);
    const double li = loss(i, trace.logits(), dz);
    if (!std::isfinite(li))
      throw NumericalError("non-finite loss at sample " + std::to_string(i),
                           static_cast<int>(params.num_layers()) - 1);
    out.loss += li;
    if (std::all_of(dz.begin(), dz.end(), [](double v) { return v == 0.0; })) continue;
    backprop(params, trace, dz, out.grads);
  }
  return out;
}

ModelParams sgd_step(const ModelParams& params, const GradientSet& grads, const SgdOptions& opts,
                     MomentumState& state) {
  if (opts.lr < 0.0) throw ContractViolation("sgd_step: negative learning rate");
  const std::size_t n = params.size();
  if (state.buffer.empty()) state.buffer.assign(n, 0.0);
  if (state.buffer.size() != n) throw ContractViolation("sgd_step: momentum buffer shape mismatch");

  ModelParams next = params;
  std::size_t idx = 0;
  auto update = [&](std::vector<double>& theta, const std::vector<double>& g) {
    for (std::size_t j = 0; j < theta.size(); ++j, ++idx) {
      const double d = g[j] + opts.weight_decay * theta[j];
      double& buf = state.buffer[idx];
      buf = opts.momentum * buf + d;
      theta[j] -= opts.lr * buf;
    }
  };
  for (std::size_t li = 0; li < next.num_layers(); ++li) {
    update(next.layers()[li].weight, grads.layers[li].weight);
    update(next.layers()[li].bias, grads.layers[li].bias);
  }
  return next;
}

}  // namespace ebst
