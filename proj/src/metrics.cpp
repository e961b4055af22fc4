// Copyright 2026 The ebst Authors
// SPDX-License-Identifier: Apache-2.0

#include "ebst/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ebst/energy.hpp"
#include "ebst/error.hpp"
#include "ebst/pseudolabel.hpp"

namespace ebst {
namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
}

ClassAccuracy per_class_accuracy(std::span<const int> pred, std::span<const int> truth, int num_classes) {
  if (pred.size() != truth.size()) throw ContractViolation("per_class_accuracy: length mismatch");
  std::vector<int> correct(static_cast<std::size_t>(num_classes), 0);
  std::vector<int> count(static_cast<std::size_t>(num_classes), 0);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (truth[i] < 0 || truth[i] >= num_classes || pred[i] < 0 || pred[i] >= num_classes)
      throw ContractViolation("per_class_accuracy: label out of range");
    ++count[truth[i]];
    if (pred[i] == truth[i]) ++correct[truth[i]];
  }
  ClassAccuracy out;
  out.per_class.assign(static_cast<std::size_t>(num_classes), kNaN);
  double sum = 0.0;
  int present = 0;
  for (int k = 0; k < num_classes; ++k) {
    if (count[k] == 0) continue;
    out.per_class[k] = static_cast<double>(correct[k]) / count[k];
    sum += out.per_class[k];
    ++present;
  }
  out.mean = present == 0 ? kNaN : sum / present;
  return out;
}

double marginal_kl(std::span<const double> pred_marginal, std::span<const double> true_marginal,
                   KlDirection direction) {
  if (pred_marginal.size() != true_marginal.size()) throw ContractViolation("marginal_kl: length mismatch");
  const auto q = direction == KlDirection::true_to_pred ? true_marginal : pred_marginal;
  const auto p = direction == KlDirection::true_to_pred ? pred_marginal : true_marginal;
  double kl = 0.0;
  for (std::size_t k = 0; k < q.size(); ++k) {
    if (q[k] == 0.0) continue;
    kl += q[k] * std::log(q[k] / std::max(p[k], kProbFloor));
  }
  return kl;
}

EnergyStats energy_stats(std::span<const double> energies) {
  if (energies.empty()) throw ContractViolation("energy_stats: empty input");
  EnergyStats s{0.0, energies.front(), energies.front()};
  for (double e : energies) {
    s.mean += e;
    s.min = std::min(s.min, e);
    s.max = std::max(s.max, e);
  }
  s.mean /= static_cast<double>(energies.size());
  return s;
}

std::vector<int> Evaluator::target_truth(const DomainDataset& ds) {
  return ds.tag() == DomainTag::target ? ds.hidden_labels(EvalAccess{}) : ds.labels();
}

EvalReport Evaluator::evaluate(const ModelParams& params, const DomainDataset& ds, KlDirection direction) {
  const int k_count = params.num_classes();
  const auto& truth_all = ds.tag() == DomainTag::target ? ds.hidden_labels(EvalAccess{}) : ds.labels();

  std::vector<int> pred;
  std::vector<int> truth;
  std::vector<double> energies;
  std::vector<double> pred_marginal(static_cast<std::size_t>(k_count), 0.0);
  std::vector<double> true_marginal(static_cast<std::size_t>(k_count), 0.0);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto z = mlp_forward(params, ds.features()[i]);
    const auto p = softmax(z);
    energies.push_back(energy(z));
    for (int k = 0; k < k_count; ++k) pred_marginal[k] += p[k];
    if (i < truth_all.size() && truth_all[i] >= 0) {
      pred.push_back(argmax(p));
      truth.push_back(truth_all[i]);
      true_marginal[truth_all[i]] += 1.0;
    }
  }

  EvalReport r;
  if (ds.empty()) {
    r.per_class_acc.assign(static_cast<std::size_t>(k_count), kNaN);
    r.mean_acc = r.marginal_kl = r.mean_energy = r.min_energy = r.max_energy = kNaN;
    return r;
  }
  const auto acc = per_class_accuracy(pred, truth, k_count);
  r.per_class_acc = acc.per_class;
  r.mean_acc = acc.mean;
  if (truth.empty()) {
    r.marginal_kl = kNaN;
  } else {
    for (auto& v : pred_marginal) v /= static_cast<double>(ds.size());
    for (auto& v : true_marginal) v /= static_cast<double>(truth.size());
    r.marginal_kl = marginal_kl(pred_marginal, true_marginal, direction);
  }
  const auto es = energy_stats(energies);
  r.mean_energy = es.mean;
  r.min_energy = es.min;
  r.max_energy = es.max;
  return r;
}

}  // namespace ebst
