// Copyright 2026 The ebst Authors
// SPDX-License-Identifier: Apache-2.0

#include "ebst/selftrain.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ebst/error.hpp"

namespace ebst {

std::string_view to_string(Mode mode) {
  switch (mode) {
    case Mode::cbst: return "cbst";
    case Mode::crst_ls: return "crst-ls";
    case Mode::rebm: return "rebm";
    case Mode::lebm: return "lebm";
    case Mode::anneal: return "anneal";
  }
  return "?";
}

Mode parse_mode(std::string_view name) {
  for (Mode m : {Mode::cbst, Mode::crst_ls, Mode::rebm, Mode::lebm, Mode::anneal})
    if (to_string(m) == name) return m;
  throw ConfigError("unknown mode '" + std::string(name) + "' (cbst, crst-ls, rebm, lebm, anneal)");
}

std::string_view to_string(EnergyEstimator e) { return e == EnergyEstimator::direct ? "direct" : "sgld"; }

EnergyEstimator parse_estimator(std::string_view name) {
  if (name == "direct") return EnergyEstimator::direct;
  if (name == "sgld") return EnergyEstimator::sgld;
  throw ConfigError("unknown energy estimator '" + std::string(name) + "' (direct, sgld)");
}

void TrainConfig::validate() const {
  if (alpha < 0.0) throw ConfigError("alpha must be >= 0");
  if (!(epsilon >= 0.0 && epsilon < 1.0)) throw ConfigError("epsilon must be in [0, 1)");
  if (!(portion_start > 0.0 && portion_start <= 1.0)) throw ConfigError("portion start must be in (0, 1]");
  if (!(portion_max > 0.0 && portion_max <= 1.0)) throw ConfigError("portion max must be in (0, 1]");
  if (portion_step < 0.0) throw ConfigError("portion step must be >= 0");
  if (sgd.lr < 0.0 || sgd.weight_decay < 0.0 || sgd.momentum < 0.0 || sgd.momentum >= 1.0)
    throw ConfigError("invalid optimizer settings");
  if (epochs < 1) throw ConfigError("epochs per round must be >= 1");
  if (sgld.steps < 0) throw ConfigError("sgld steps must be >= 0");
  if (!(divergence_limit > 0.0)) throw ConfigError("divergence limit must be > 0");
}

TrainState TrainState::initial(ModelParams params, const TrainConfig& config, std::uint64_t seed) {
  config.validate();
  TrainState s;
  s.params = std::move(params);
  s.config = config;
  s.portion = config.portion_start;
  s.seed = seed;
  return s;
}

namespace {

// -sum_k y_k log softmax(z)_k with gradient (sum y) softmax(z) - y.
double soft_ce(std::span<const double> z, std::span<const double> y, std::span<double> grad) {
  const double mass = std::accumulate(y.begin(), y.end(), 0.0);
  if (mass == 0.0) return 0.0;
  const double lse = log_sum_exp(z);
  double v = 0.0;
  for (std::size_t k = 0; k < z.size(); ++k)
    if (y[k] != 0.0) v -= y[k] * (z[k] - lse);
  if (!grad.empty()) {
    const auto p = softmax(z);
    for (std::size_t k = 0; k < z.size(); ++k) grad[k] += mass * p[k] - y[k];
  }
  return v;
}

double log_lambda_term(std::span<const double> y, const LambdaVector& lambdas) {
  double v = 0.0;
  for (std::size_t k = 0; k < y.size(); ++k)
    if (y[k] != 0.0) v += y[k] * std::log(lambdas.values[k]);
  return v;
}

struct TargetTerms {
  double pseudo = 0.0;
  double energy = 0.0;
  bool renormalized = false;
};

struct TermOptions {
  Mode mode;
  double alpha;
  double beta;
  bool with_energy;
};

// Per-target-sample contribution to J; adds d/dz into `grad` when non-empty.
TargetTerms target_terms(std::span<const double> z, const PseudoLabel& label, const LambdaVector& lambdas,
                         const TermOptions& o, std::span<double> grad) {
  TargetTerms t;
  const bool energy_on = o.with_energy && o.alpha > 0.0;
  auto add_energy = [&](double weight) {
    t.energy += weight * energy(z);
    if (!grad.empty()) {
      const auto g = energy_grad_logits(z);
      for (std::size_t k = 0; k < z.size(); ++k) grad[k] += weight * g[k];
    }
  };

  switch (o.mode) {
    case Mode::cbst:
    case Mode::crst_ls:
    case Mode::rebm:
      if (label.selected) t.pseudo = soft_ce(z, label.vector, grad) + log_lambda_term(label.vector, lambdas);
      if (o.mode == Mode::rebm && energy_on) add_energy(o.alpha);
      break;
    case Mode::lebm:
      if (label.selected) {
        const auto l = ebm_loss(z, label.vector, lambdas.values);
        t.pseudo = l.value;
        t.renormalized = l.renormalized;
        if (!grad.empty())
          for (std::size_t k = 0; k < z.size(); ++k) grad[k] += l.grad[k];
      }
      break;
    case Mode::anneal: {
      const double w_l = 1.0 / (1.0 + o.beta);
      const double w_r = o.beta / (1.0 + o.beta);
      if (label.selected) {
        const auto l = ebm_loss(z, label.vector, lambdas.values);
        t.renormalized = l.renormalized;
        double r = 0.0;
        const auto hard = hard_pseudo_label(label.vector, lambdas);
        if (w_r > 0.0 && hard.selected) {
          std::vector<double> g(z.size(), 0.0);
          r = soft_ce(z, hard.vector, grad.empty() ? std::span<double>() : std::span<double>(g)) +
              log_lambda_term(hard.vector, lambdas);
          if (!grad.empty())
            for (std::size_t k = 0; k < z.size(); ++k) grad[k] += w_r * g[k];
        }
        t.pseudo = w_l * l.value + w_r * r;
        if (!grad.empty())
          for (std::size_t k = 0; k < z.size(); ++k) grad[k] += w_l * l.grad[k];
      }
      if (energy_on && w_r > 0.0) add_energy(w_r * o.alpha);
      break;
    }
  }
  return t;
}

const PseudoLabel& label_at(const PseudoLabelSet& labels, std::size_t i, const PseudoLabel& none) {
  return labels.labels.empty() ? none : labels.labels[i];
}

void check_alignment(const DomainDataset& target, const PseudoLabelSet& labels) {
  if (!labels.labels.empty() && labels.labels.size() != target.size())
    throw ContractViolation("pseudo-label set does not match the target set");
}

std::vector<std::vector<double>> stacked(const DomainDataset& source, const DomainDataset& target) {
  auto batch = source.features();
  batch.insert(batch.end(), target.features().begin(), target.features().end());
  return batch;
}

// Builds the per-sample loss over [source..., target...].
SampleLoss make_loss(const DomainDataset& source, const PseudoLabelSet& labels, const LambdaVector& lambdas,
                     const TermOptions& opts, const PseudoLabel& none) {
  const std::size_t ns = source.size();
  return [&source, &labels, &lambdas, opts, &none, ns](
             std::size_t i, std::span<const double> z, std::span<double> grad) {
    if (i < ns) {
      std::vector<double> y(z.size(), 0.0);
      y[static_cast<std::size_t>(source.labels()[i])] = 1.0;
      return soft_ce(z, y, grad);
    }
    const auto t = target_terms(z, label_at(labels, i - ns, none), lambdas, opts, grad);
    return t.pseudo + t.energy;
  };
}

void check_source(const DomainDataset& source) {
  for (int y : source.labels())
    if (y < 0) throw ConfigError("source set contains unlabeled rows");
}

}  // namespace

ObjectiveTerms total_objective(const ModelParams& params, const DomainDataset& source,
                               const DomainDataset& target, const PseudoLabelSet& labels,
                               const LambdaVector& lambdas, double alpha, Mode mode, double beta) {
  check_alignment(target, labels);
  check_source(source);
  const auto none = PseudoLabel::none(params.num_classes());
  const TermOptions opts{mode, alpha, beta, true};
  ObjectiveTerms out;
  for (std::size_t i = 0; i < source.size(); ++i) {
    const auto z = mlp_forward(params, source.features()[i]);
    std::vector<double> y(z.size(), 0.0);
    y[static_cast<std::size_t>(source.labels()[i])] = 1.0;
    out.source_ce += soft_ce(z, y, {});
  }
  for (std::size_t i = 0; i < target.size(); ++i) {
    const auto z = mlp_forward(params, target.features()[i]);
    const auto t = target_terms(z, label_at(labels, i, none), lambdas, opts, {});
    out.target_term += t.pseudo;
    out.energy_term += t.energy;
  }
  out.total = out.source_ce + out.target_term + out.energy_term;
  return out;
}

LossAndGrad objective_gradient(const ModelParams& params, const DomainDataset& source,
                               const DomainDataset& target, const PseudoLabelSet& labels,
                               const LambdaVector& lambdas, double alpha, Mode mode, double beta) {
  check_alignment(target, labels);
  check_source(source);
  const auto none = PseudoLabel::none(params.num_classes());
  const TermOptions opts{mode, alpha, beta, true};
  return backward(params, stacked(source, target), make_loss(source, labels, lambdas, opts, none));
}

double label_lower_bound(const PseudoLabelSet& labels, const LambdaVector& lambdas) {
  double b = 0.0;
  for (const auto& l : labels.labels)
    if (l.selected) b += log_lambda_term(l.vector, lambdas);
  return b;
}

Step1Result step1_generate(const TrainState& state, const DomainDataset& target) {
  std::vector<ProbVector> probs;
  probs.reserve(target.size());
  for (const auto& x : target.features()) probs.push_back(softmax(mlp_forward(state.params, x)));

  Step1Result out;
  out.labels.round = state.round;
  if (probs.empty()) {
    out.lambdas.values.assign(static_cast<std::size_t>(state.params.num_classes()), 1.0);
    return out;
  }
  out.lambdas = state.config.freeze_lambdas && state.lambdas ? *state.lambdas
                                                             : compute_lambdas(probs, state.portion);
  const int k_count = state.params.num_classes();
  out.labels.labels.reserve(probs.size());
  for (const auto& p : probs) {
    switch (state.config.mode) {
      case Mode::cbst:
      case Mode::rebm:
        out.labels.labels.push_back(hard_pseudo_label(p, out.lambdas));
        break;
      case Mode::crst_ls: {
        auto l = hard_pseudo_label(p, out.lambdas);
        out.labels.labels.push_back(l.selected ? smooth_label(l, state.config.epsilon, k_count) : l);
        break;
      }
      case Mode::lebm:
      case Mode::anneal:
        out.labels.labels.push_back(soft_pseudo_label(p, out.lambdas));
        break;
    }
  }
  return out;
}

Step2Result step2_retrain(const TrainState& state, const DomainDataset& source,
                          const DomainDataset& target, const PseudoLabelSet& labels,
                          const LambdaVector& lambdas, double beta, Rng& rng) {
  check_alignment(target, labels);
  check_source(source);
  const auto& cfg = state.config;
  const auto none = PseudoLabel::none(state.params.num_classes());
  const TermOptions opts{cfg.mode, cfg.alpha, beta,
                         cfg.step2_energy && cfg.estimator == EnergyEstimator::direct};
  const auto batch = stacked(source, target);
  const double scale = batch.empty() ? 0.0 : 1.0 / static_cast<double>(batch.size());
  const bool contrastive = cfg.step2_energy && cfg.estimator == EnergyEstimator::sgld && cfg.alpha > 0.0 &&
                           (cfg.mode == Mode::rebm || cfg.mode == Mode::anneal);
  const double energy_weight = cfg.mode == Mode::anneal ? cfg.alpha * beta / (1.0 + beta) : cfg.alpha;

  Step2Result out{state.params, {}};
  MomentumState momentum;
  const auto loss = make_loss(source, labels, lambdas, opts, none);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    auto lg = backward(out.params, batch, loss);
    if (contrastive && energy_weight > 0.0) {
      // alpha * [E(x_t) - E(x_t^-)]: pull energy down on data, up on negatives.
      const auto& tx = target.features();
      std::vector<std::vector<double>> negatives;
      negatives.reserve(tx.size());
      for (const auto& x : tx) negatives.push_back(sgld_negative_sample(out.params, x, cfg.sgld, rng).x);
      const auto pos = backward(out.params, tx, [&](std::size_t, std::span<const double> z, std::span<double> g) {
        const auto eg = energy_grad_logits(z);
        for (std::size_t k = 0; k < z.size(); ++k) g[k] = energy_weight * eg[k];
        return 0.0;
      });
      const auto neg = backward(out.params, negatives,
                                [&](std::size_t, std::span<const double> z, std::span<double> g) {
                                  const auto eg = energy_grad_logits(z);
                                  for (std::size_t k = 0; k < z.size(); ++k) g[k] = -energy_weight * eg[k];
                                  return 0.0;
                                });
      for (std::size_t li = 0; li < lg.grads.layers.size(); ++li) {
        auto& g = lg.grads.layers[li];
        for (std::size_t j = 0; j < g.weight.size(); ++j)
          g.weight[j] += pos.grads.layers[li].weight[j] + neg.grads.layers[li].weight[j];
        for (std::size_t j = 0; j < g.bias.size(); ++j)
          g.bias[j] += pos.grads.layers[li].bias[j] + neg.grads.layers[li].bias[j];
      }
    }
    for (auto& l : lg.grads.layers) {
      for (auto& v : l.weight) v *= scale;
      for (auto& v : l.bias) v *= scale;
    }
    out.params = sgd_step(out.params, lg.grads, cfg.sgd, momentum);
    const double j = total_objective(out.params, source, target, labels, lambdas, cfg.alpha, cfg.mode, beta).total;
    if (!std::isfinite(j) || std::abs(j) > cfg.divergence_limit)
      throw DivergenceError("step 2 diverged at epoch " + std::to_string(epoch) + " (J = " + std::to_string(j) + ")",
                            epoch);
    out.loss_trace.push_back(j);
  }
  return out;
}

Step2Result pretrain_source(const ModelParams& params, const DomainDataset& source, const SgdOptions& sgd,
                            int epochs) {
  check_source(source);
  Step2Result out{params, {}};
  if (source.empty()) return out;
  const double scale = 1.0 / static_cast<double>(source.size());
  const auto loss = [&source](std::size_t i, std::span<const double> z, std::span<double> grad) {
    std::vector<double> y(z.size(), 0.0);
    y[static_cast<std::size_t>(source.labels()[i])] = 1.0;
    return soft_ce(z, y, grad);
  };
  MomentumState momentum;
  for (int epoch = 0; epoch < epochs; ++epoch) {
    auto lg = backward(out.params, source.features(), loss);
    for (auto& l : lg.grads.layers) {
      for (auto& v : l.weight) v *= scale;
      for (auto& v : l.bias) v *= scale;
    }
    out.params = sgd_step(out.params, lg.grads, sgd, momentum);
    out.loss_trace.push_back(backward(out.params, source.features(), loss).loss);
  }
  return out;
}

RoundResult run_round(const TrainState& state, const DomainDataset& source, const DomainDataset& target) {
  const auto& cfg = state.config;
  cfg.validate();
  const double beta = cfg.mode == Mode::anneal ? anneal_beta(state.round) : 0.0;

  auto step1 = step1_generate(state, target);
  const auto objective = [&](const ModelParams& w, const PseudoLabelSet& y) {
    return total_objective(w, source, target, y, step1.lambdas, cfg.alpha, cfg.mode, beta);
  };

  RoundReport rep;
  rep.round = state.round;
  rep.portion = state.portion;
  rep.lambdas = step1.lambdas.values;
  rep.beta = beta;
  rep.step1_loss_before = objective(state.params, state.labels).total;
  rep.step1_loss_after = objective(state.params, step1.labels).total;
  rep.selection_fraction = step1.labels.selection_fraction();
  rep.lower_bound = label_lower_bound(step1.labels, step1.lambdas);

  Rng rng(stream_seed(state.seed ^ static_cast<std::uint64_t>(state.round), "sgld"));
  auto step2 = step2_retrain(state, source, target, step1.labels, step1.lambdas, beta, rng);
  rep.step2_loss_trace = step2.loss_trace;
  rep.final_terms = objective(step2.params, step1.labels);

  if (cfg.mode == Mode::lebm || cfg.mode == Mode::anneal) {
    for (const auto& l : step1.labels.labels) {
      if (!l.selected) continue;
      const double mass = std::accumulate(l.vector.begin(), l.vector.end(), 0.0);
      if (std::abs(mass - 1.0) > 1e-6) ++rep.renormalized_labels;
    }
  }

  rep.step1_nonincreasing = rep.step1_loss_after <= rep.step1_loss_before + 1e-9;
  double prev = rep.step1_loss_after;
  for (double v : rep.step2_loss_trace) {
    if (v > prev + 1e-6) rep.step2_nonincreasing = false;
    prev = v;
  }
  rep.bound_holds = rep.lower_bound <= rep.step1_loss_before && rep.lower_bound <= rep.step1_loss_after;
  for (double v : rep.step2_loss_trace)
    if (v < rep.lower_bound) rep.bound_holds = false;

  const auto src_eval = Evaluator::evaluate(step2.params, source, cfg.kl_direction);
  const auto tgt_eval = Evaluator::evaluate(step2.params, target, cfg.kl_direction);
  rep.source_acc = src_eval.mean_acc;
  rep.target_acc = tgt_eval.mean_acc;
  rep.marginal_kl = tgt_eval.marginal_kl;
  rep.mean_target_energy = tgt_eval.mean_energy;

  RoundResult out{state, std::move(rep)};
  out.state.params = std::move(step2.params);
  out.state.round = state.round + 1;
  out.state.portion = std::min(state.portion + cfg.portion_step, std::max(cfg.portion_max, cfg.portion_start));
  out.state.labels = std::move(step1.labels);
  out.state.lambdas = std::move(step1.lambdas);
  return out;
}

CemTrace cem_trace(const std::vector<RoundReport>& reports) {
  if (reports.empty()) throw ContractViolation("cem_trace: no completed rounds");
  CemTrace t;
  for (const auto& r : reports) {
    const double e = -r.step1_loss_before;
    const double c = -r.step1_loss_after;
    const double m = -r.step2_final_loss();
    t.phases.push_back({r.round, 'E', e});
    t.phases.push_back({r.round, 'C', c});
    t.phases.push_back({r.round, 'M', m});
    if (c < e - 1e-9 || m < c - 1e-6) t.ascending = false;
  }
  return t;
}

}  // namespace ebst
