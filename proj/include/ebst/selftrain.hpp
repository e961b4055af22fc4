// Copyright 2026 The ebst Authors
// SPDX-License-Identifier: Apache-2.0

// Alternating self-training on a labeled source set and an unlabeled target
// set. One round is
//
//   step 1: fix the weights, recompute class thresholds and pseudo-labels;
//   step 2: fix the labels, run gradient descent on the weights.
//
// The minimized objective is
//
//   J(w, Y) = sum_s CE(y_s, p_w(x_s))
//           + sum_t sum_k y_tk [-log p_w(k|x_t) + log lambda_k]
//           + alpha * sum_t E_w(x_t)
//
// with the target term swapped for the soft-label energy loss in lebm mode
// and for its annealed blend in anneal mode.

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ebst/datagen.hpp"
#include "ebst/error.hpp"
#include "ebst/energy.hpp"
#include "ebst/metrics.hpp"
#include "ebst/nn.hpp"
#include "ebst/pseudolabel.hpp"

namespace ebst {

enum class Mode {
  cbst,    // hard class-balanced labels
  crst_ls, // hard labels with label smoothing
  rebm,    // hard labels plus alpha * energy regularizer
  lebm,    // soft labels with the energy loss
  anneal,  // blend from rebm to lebm over the first rounds
};

std::string_view to_string(Mode mode);
/// Accepts cbst, crst-ls, rebm, lebm, anneal. Throws ConfigError.
Mode parse_mode(std::string_view name);

/// How the energy term's gradient is obtained in step 2.
enum class EnergyEstimator {
  direct,  // backprop through alpha * E(x_t)
  sgld,    // contrastive divergence against short SGLD chains from x_t
};

std::string_view to_string(EnergyEstimator e);
EnergyEstimator parse_estimator(std::string_view name);

struct TrainConfig {
  Mode mode = Mode::rebm;
  double alpha = 1.0;
  double epsilon = 0.1;
  double portion_start = 0.2;
  double portion_step = 0.05;
  double portion_max = 0.5;
  SgdOptions sgd{1e-3, 5e-4, 0.9};
  int epochs = 20;
  /// Keep the energy term in step 2. false gives the bare two-CE retraining
  /// loss.
  bool step2_energy = true;
  /// Reuse the round-0 thresholds in later rounds.
  bool freeze_lambdas = false;
  EnergyEstimator estimator = EnergyEstimator::direct;
  SgldOptions sgld{};
  /// A step-2 objective with |J| above this, or non-finite, aborts the round.
  double divergence_limit = 1e6;
  KlDirection kl_direction = KlDirection::true_to_pred;

  /// Throws ConfigError.
  void validate() const;
};

struct TrainState {
  ModelParams params;
  TrainConfig config;
  int round = 0;
  double portion = 0.2;
  std::uint64_t seed = 0;
  /// Labels from the previous round; empty before round 0.
  PseudoLabelSet labels;
  std::optional<LambdaVector> lambdas;

  static TrainState initial(ModelParams params, const TrainConfig& config, std::uint64_t seed);
};

/// Decomposition of J. For lebm, target_term holds the energy loss and
/// energy_term is 0; for anneal, energy_term holds beta*alpha*E/(1+beta).
struct ObjectiveTerms {
  double source_ce = 0.0;
  double target_term = 0.0;
  double energy_term = 0.0;
  double total = 0.0;
};

/// J(w, Y) for fixed labels and thresholds. `beta` is only read in anneal
/// mode. In anneal mode the hard label of a sample is recovered from its soft
/// label with hard_pseudo_label, which reproduces the step-1 decision.
ObjectiveTerms total_objective(const ModelParams& params, const DomainDataset& source,
                               const DomainDataset& target, const PseudoLabelSet& labels,
                               const LambdaVector& lambdas, double alpha, Mode mode, double beta = 0.0);

/// Gradient of total_objective w.r.t. every parameter (same terms, same
/// scale, energy estimator `direct`).
LossAndGrad objective_gradient(const ModelParams& params, const DomainDataset& source,
                               const DomainDataset& target, const PseudoLabelSet& labels,
                               const LambdaVector& lambdas, double alpha, Mode mode, double beta = 0.0);

/// sum over selected t of sum_k y_tk log lambda_k.
double label_lower_bound(const PseudoLabelSet& labels, const LambdaVector& lambdas);

struct Step1Result {
  PseudoLabelSet labels;
  LambdaVector lambdas;
};

/// Thresholds from the current predictions (or the frozen ones), then hard
/// labels for cbst/crst-ls/rebm, soft labels for lebm/anneal, smoothing for
/// crst-ls.
Step1Result step1_generate(const TrainState& state, const DomainDataset& target);

struct Step2Result {
  ModelParams params;
  /// J after each epoch.
  std::vector<double> loss_trace;
};

/// Thrown when step 2 exceeds the divergence limit.
class DivergenceError : public NumericalError {
 public:
  DivergenceError(const std::string& what, int epoch) : NumericalError(what, -1), epoch_(epoch) {}
  int epoch() const noexcept { return epoch_; }

 private:
  int epoch_;
};

/// Full-batch gradient descent on J / (n_source + n_target) for `epochs`
/// epochs. `rng` feeds the SGLD estimator and is unused otherwise.
Step2Result step2_retrain(const TrainState& state, const DomainDataset& source,
                          const DomainDataset& target, const PseudoLabelSet& labels,
                          const LambdaVector& lambdas, double beta, Rng& rng);

/// Source-only training used as the starting point and as the no-adaptation
/// baseline. Returns J_source after each epoch in `loss_trace`.
Step2Result pretrain_source(const ModelParams& params, const DomainDataset& source,
                            const SgdOptions& sgd, int epochs);

struct RoundReport {
  int round = 0;
  double portion = 0.0;
  std::vector<double> lambdas;
  double step1_loss_before = 0.0;
  double step1_loss_after = 0.0;
  std::vector<double> step2_loss_trace;
  ObjectiveTerms final_terms;
  double mean_target_energy = 0.0;
  double selection_fraction = 0.0;
  double beta = 0.0;
  double lower_bound = 0.0;
  double source_acc = 0.0;
  double target_acc = 0.0;
  double marginal_kl = 0.0;
  /// step1_loss_after <= step1_loss_before + 1e-9
  bool step1_nonincreasing = true;
  /// each step-2 value <= the previous one (starting from step1_loss_after) + 1e-6
  bool step2_nonincreasing = true;
  /// lower_bound <= every recorded loss of this round
  bool bound_holds = true;
  /// soft labels that had to be renormalized inside the energy loss
  int renormalized_labels = 0;

  double step2_final_loss() const {
    return step2_loss_trace.empty() ? step1_loss_after : step2_loss_trace.back();
  }
};

struct RoundResult {
  TrainState state;
  RoundReport report;
};

/// Step 1 then step 2, evaluation, and the bookkeeping for the next round.
RoundResult run_round(const TrainState& state, const DomainDataset& source, const DomainDataset& target);

/// One phase of the classification-EM reading of a round. `rcml` is the
/// maximized objective, i.e. -J, at the end of the phase.
struct CemPhase {
  int round = 0;
  char step = 'E';  // 'E', 'C' or 'M'
  double rcml = 0.0;
};

struct CemTrace {
  std::vector<CemPhase> phases;
  /// C >= E and M >= C (within 1e-6) in every round.
  bool ascending = true;
};

/// E: posteriors under the incoming weights with the previous labels;
/// C: the new labels; M: the retrained weights. Throws ContractViolation when
/// `reports` is empty.
CemTrace cem_trace(const std::vector<RoundReport>& reports);

}  // namespace ebst
