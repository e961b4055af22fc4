// Copyright 2026 The ebst Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <vector>

#include "ebst/datagen.hpp"
#include "ebst/nn.hpp"

namespace ebst {

struct ClassAccuracy {
  /// correct_k / count_k; NaN for classes absent from the truth.
  std::vector<double> per_class;
  /// Mean over present classes; NaN when no class is present.
  double mean = 0.0;
};

/// Throws ContractViolation on length mismatch or labels outside [0, K).
ClassAccuracy per_class_accuracy(std::span<const int> pred, std::span<const int> truth, int num_classes);

enum class KlDirection {
  true_to_pred,  // KL(true || predicted), the default
  pred_to_true,  // KL(predicted || true)
};

/// sum_k q_k ln(q_k / p_k) in nats, with the second argument of the
/// divergence floored at kProbFloor. Terms with q_k = 0 vanish.
double marginal_kl(std::span<const double> pred_marginal, std::span<const double> true_marginal,
                   KlDirection direction = KlDirection::true_to_pred);

struct EnergyStats {
  double mean = 0.0;
  double min = 0.0;
  double max = 0.0;
};

/// Throws ContractViolation on empty input.
EnergyStats energy_stats(std::span<const double> energies);

struct EvalReport {
  std::vector<double> per_class_acc;
  double mean_acc = 0.0;
  double marginal_kl = 0.0;
  double mean_energy = 0.0;
  double min_energy = 0.0;
  double max_energy = 0.0;
};

/// The only code path that reads a target set's hidden labels.
struct Evaluator {
  static EvalReport evaluate(const ModelParams& params, const DomainDataset& ds,
                             KlDirection direction = KlDirection::true_to_pred);
  /// True labels of `ds` (hidden ones for a target set), for export.
  static std::vector<int> target_truth(const DomainDataset& ds);
};

}  // namespace ebst
