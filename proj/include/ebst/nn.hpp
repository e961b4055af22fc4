// Copyright 2026 The ebst Authors
// SPDX-License-Identifier: Apache-2.0

// Small fully-connected classifier with hand-written reverse mode.
//
// Hidden layers use tanh, the output layer is linear and produces the K
// class logits. Everything is double precision and row-major.

#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace ebst {

using Logits = std::vector<double>;
using ProbVector = std::vector<double>;

/// Dense layer: y = W x + b, W stored row-major as [out x in].
struct Layer {
  int in = 0;
  int out = 0;
  std::vector<double> weight;
  std::vector<double> bias;

  double& w(int row, int col) { return weight[static_cast<std::size_t>(row) * in + col]; }
  double w(int row, int col) const { return weight[static_cast<std::size_t>(row) * in + col]; }

  bool operator==(const Layer&) const = default;
};

class ModelParams {
 public:
  ModelParams() = default;
  /// Takes ownership of `layers` and validates the chain. Throws ConfigError.
  explicit ModelParams(std::vector<Layer> layers);

  /// Glorot-uniform weights in [-a, a], a = sqrt(6 / (in + out)); zero biases.
  /// `dims` is {D, hidden..., K}.
  static ModelParams glorot(std::span<const int> dims, std::uint64_t seed);
  /// All weights and biases zero.
  static ModelParams zeros(std::span<const int> dims);

  int input_dim() const { return layers_.front().in; }
  int num_classes() const { return layers_.back().out; }
  std::size_t num_layers() const { return layers_.size(); }
  std::size_t size() const;

  const std::vector<Layer>& layers() const { return layers_; }
  std::vector<Layer>& layers() { return layers_; }

  /// Flat view in layer order, weights before bias within a layer.
  double get(std::size_t flat_index) const;
  void set(std::size_t flat_index, double value);

  bool operator==(const ModelParams&) const = default;

 private:
  std::vector<Layer> layers_;
};

/// Same shapes as the owning ModelParams.
struct GradientSet {
  std::vector<Layer> layers;

  static GradientSet zeros_like(const ModelParams& params);
  double get(std::size_t flat_index) const;
  bool all_zero() const;
};

/// Throws ConfigError on a dimension mismatch.
Logits mlp_forward(const ModelParams& params, std::span<const double> x);

/// Per-layer activations kept for the backward pass.
/// activations[0] is the input, activations[i + 1] the output of layer i
/// (after tanh for hidden layers, raw logits for the last one).
struct ForwardTrace {
  std::vector<std::vector<double>> activations;
  std::span<const double> logits() const { return activations.back(); }
};

ForwardTrace forward_trace(const ModelParams& params, std::span<const double> x);

/// Adds d(loss)/d(params) to `grads` given d(loss)/d(logits). When
/// `input_grad` is non-null it receives d(loss)/d(x).
/// Throws NumericalError with the layer index on a non-finite value.
void backprop(const ModelParams& params, const ForwardTrace& trace,
              std::span<const double> logit_grad, GradientSet& grads,
              std::vector<double>* input_grad = nullptr);

double log_sum_exp(std::span<const double> z);
ProbVector softmax(std::span<const double> z);

struct CrossEntropy {
  double value = 0.0;
  bool clamped = false;  // some p_k with y_k > 0 was floored at kProbFloor
};

inline constexpr double kProbFloor = 1e-12;

/// -sum_k y_k ln p_k. Zero for the all-zero label.
CrossEntropy cross_entropy(std::span<const double> p, std::span<const double> y);

/// Per-sample loss on logits. Returns the loss of sample `index` and writes
/// d(loss)/d(logits) into `grad` (pre-zeroed, length K).
using SampleLoss =
    std::function<double(std::size_t index, std::span<const double> logits, std::span<double> grad)>;

struct LossAndGrad {
  double loss = 0.0;
  GradientSet grads;
};

/// Sum of `loss` over `batch` and its exact gradient w.r.t. every parameter.
LossAndGrad backward(const ModelParams& params, const std::vector<std::vector<double>>& batch,
                     const SampleLoss& loss);

struct SgdOptions {
  double lr = 1e-3;
  double weight_decay = 0.0;
  double momentum = 0.0;
};

/// Heavy-ball buffer, created lazily on the first step.
struct MomentumState {
  std::vector<double> buffer;
};

/// d = g + wd * theta; buf = momentum * buf + d; theta -= lr * buf.
ModelParams sgd_step(const ModelParams& params, const GradientSet& grads, const SgdOptions& opts,
                     MomentumState& state);

}  // namespace ebst
