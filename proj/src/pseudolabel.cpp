// Copyright 2026 The ebst Authors
// SPDX-License-Identifier: Apache-2.0

#include "ebst/pseudolabel.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "ebst/error.hpp"

namespace ebst {

double PseudoLabelSet::selection_fraction() const {
  if (labels.empty()) return 0.0;
  const auto n = std::count_if(labels.begin(), labels.end(), [](const auto& l) { return l.selected; });
  return static_cast<double>(n) / static_cast<double>(labels.size());
}

int argmax(std::span<const double> v) {
  return static_cast<int>(std::max_element(v.begin(), v.end()) - v.begin());
}

LambdaVector compute_lambdas(std::span<const ProbVector> probs, double portion) {
  if (probs.empty()) throw ConfigError("compute_lambdas: no predictions");
  if (!(portion > 0.0 && portion <= 1.0)) throw ConfigError("compute_lambdas: portion must be in (0, 1]");

  const std::size_t k_count = probs.front().size();
  std::vector<std::vector<double>> buckets(k_count);
  for (const auto& p : probs) {
    if (p.size() != k_count) throw ConfigError("compute_lambdas: ragged probability vectors");
    const int k = argmax(p);
    buckets[static_cast<std::size_t>(k)].push_back(p[static_cast<std::size_t>(k)]);
  }

  LambdaVector out;
  out.values.assign(k_count, 1.0);
  for (std::size_t k = 0; k < k_count; ++k) {
    auto& b = buckets[k];
    if (b.empty()) continue;
    std::sort(b.begin(), b.end(), std::greater<>());
    const auto idx = static_cast<std::size_t>(std::floor(portion * static_cast<double>(b.size() - 1)));
    out.values[k] = std::min(b[idx], kLambdaCap);
  }
  return out;
}

namespace {

// Returns k* or -1 when the sample fails the confidence test.
int select_class(std::span<const double> prob, const LambdaVector& lambdas) {
  if (prob.size() != lambdas.values.size()) throw ContractViolation("pseudo label: length mismatch");
  int best = 0;
  double best_ratio = prob[0] / lambdas.values[0];
  for (std::size_t k = 1; k < prob.size(); ++k) {
    const double r = prob[k] / lambdas.values[k];
    if (r > best_ratio) {
      best_ratio = r;
      best = static_cast<int>(k);
    }
  }
  return prob[static_cast<std::size_t>(best)] > lambdas.values[static_cast<std::size_t>(best)] ? best : -1;
}

}  // namespace

PseudoLabel hard_pseudo_label(std::span<const double> prob, const LambdaVector& lambdas) {
  const int k_count = static_cast<int>(prob.size());
  const int k = select_class(prob, lambdas);
  return k < 0 ? PseudoLabel::none(k_count) : PseudoLabel::one_hot(k_count, k);
}

PseudoLabel soft_pseudo_label(std::span<const double> prob, const LambdaVector& lambdas) {
  if (select_class(prob, lambdas) < 0) return PseudoLabel::none(static_cast<int>(prob.size()));
  return {std::vector<double>(prob.begin(), prob.end()), true};
}

PseudoLabel smooth_label(const PseudoLabel& onehot, double epsilon, int num_classes) {
  if (static_cast<int>(onehot.vector.size()) != num_classes || num_classes < 2)
    throw ContractViolation("smooth_label: label length must equal K >= 2");
  if (!(epsilon >= 0.0 && epsilon < 1.0)) throw ContractViolation("smooth_label: epsilon must be in [0, 1)");
  const auto ones = std::count(onehot.vector.begin(), onehot.vector.end(), 1.0);
  const auto zeros = std::count(onehot.vector.begin(), onehot.vector.end(), 0.0);
  if (!onehot.selected || ones != 1 || ones + zeros != num_classes)
    throw ContractViolation("smooth_label: input is not a selected one-hot label");

  const double off = epsilon / static_cast<double>(num_classes - 1);
  PseudoLabel out{std::vector<double>(static_cast<std::size_t>(num_classes), off), true};
  out.vector[static_cast<std::size_t>(argmax(onehot.vector))] = 1.0 - epsilon;
  return out;
}

double pseudo_label_objective(std::span<const double> label, std::span<const double> prob,
                              const LambdaVector& lambdas) {
  double v = 0.0;
  for (std::size_t k = 0; k < label.size(); ++k) {
    if (label[k] == 0.0) continue;
    v -= label[k] * (std::log(std::max(prob[k], kProbFloor)) - std::log(lambdas.values[k]));
  }
  return v;
}

bool is_feasible_label(std::span<const double> label, double tol) {
  if (std::all_of(label.begin(), label.end(), [](double v) { return v == 0.0; })) return true;
  if (std::any_of(label.begin(), label.end(), [](double v) { return v < 0.0; })) return false;
  return std::abs(std::accumulate(label.begin(), label.end(), 0.0) - 1.0) <= tol;
}

}  // namespace ebst
