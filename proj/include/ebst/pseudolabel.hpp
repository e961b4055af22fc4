// Copyright 2026 The ebst Authors
// SPDX-License-Identifier: Apache-2.0

// Class-balanced thresholds and the pseudo-label solvers.

#pragma once

#include <span>
#include <vector>

#include "ebst/nn.hpp"

namespace ebst {

/// Per-class confidence threshold, each in (0, 1].
struct LambdaVector {
  std::vector<double> values;
};

/// Upper cap applied to thresholds of non-empty classes, so that a sample
/// predicted with probability 1 can still pass the strict test p_k > lambda_k.
inline constexpr double kLambdaCap = 0.999999;

/// A label vector in the simplex (selected) or the zero vector (not selected).
struct PseudoLabel {
  std::vector<double> vector;
  bool selected = false;

  static PseudoLabel none(int num_classes) {
    return {std::vector<double>(static_cast<std::size_t>(num_classes), 0.0), false};
  }
  static PseudoLabel one_hot(int num_classes, int k) {
    auto l = none(num_classes);
    l.vector[static_cast<std::size_t>(k)] = 1.0;
    l.selected = true;
    return l;
  }
  bool operator==(const PseudoLabel&) const = default;
};

struct PseudoLabelSet {
  std::vector<PseudoLabel> labels;  // aligned with target sample indices
  int round = 0;

  double selection_fraction() const;
};

/// Index of the largest entry; ties go to the lowest index.
int argmax(std::span<const double> v);

/// For each class k, sort the confidences p(k|x) of samples whose argmax is k
/// in descending order and take the one at index floor(p * (count - 1)),
/// capped at kLambdaCap. Classes nobody predicts get 1.
/// Throws ConfigError on empty input or portion outside (0, 1].
LambdaVector compute_lambdas(std::span<const ProbVector> probs, double portion);

/// Closed-form minimizer of -sum_k y_k [log p_k - log lambda_k] over the
/// simplex vertices and the zero vector: one-hot at k* = argmax p_k / lambda_k
/// if p_k* > lambda_k*, otherwise zero.
PseudoLabel hard_pseudo_label(std::span<const double> prob, const LambdaVector& lambdas);

/// Same selection test as hard_pseudo_label, but keeps the raw probability
/// vector as the label.
PseudoLabel soft_pseudo_label(std::span<const double> prob, const LambdaVector& lambdas);

/// Winning class gets 1 - epsilon, the others epsilon / (K - 1).
/// Throws ContractViolation unless `onehot` is a selected one-hot vector.
PseudoLabel smooth_label(const PseudoLabel& onehot, double epsilon, int num_classes);

/// Per-sample step-1 objective -sum_k y_k [log p_k - log lambda_k].
double pseudo_label_objective(std::span<const double> label, std::span<const double> prob,
                              const LambdaVector& lambdas);

/// True for vectors in the simplex (within `tol`) or exactly zero.
bool is_feasible_label(std::span<const double> label, double tol = 1e-9);

}  // namespace ebst
