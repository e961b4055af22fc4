// Copyright 2026 The ebst Authors
// SPDX-License-Identifier: Apache-2.0

#include "ebst/energy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "ebst/error.hpp"

namespace ebst {

double energy(std::span<const double> z) { return -log_sum_exp(z); }

std::vector<double> energy_grad_logits(std::span<const double> z) {
  auto g = softmax(z);
  for (auto& v : g) v = -v;
  return g;
}

double rebm_target_term(std::span<const double> energies, double alpha) {
  if (alpha < 0.0) throw ContractViolation("rebm_target_term: alpha must be >= 0");
  if (alpha == 0.0) return 0.0;
  return alpha * std::accumulate(energies.begin(), energies.end(), 0.0);
}

EbmLoss ebm_loss(std::span<const double> z, std::span<const double> soft_label,
                 std::span<const double> lambdas) {
  const std::size_t k_count = z.size();
  if (soft_label.size() != k_count || lambdas.size() != k_count)
    throw ContractViolation("ebm_loss: length mismatch");

  EbmLoss out;
  out.grad.assign(k_count, 0.0);
  const double mass = std::accumulate(soft_label.begin(), soft_label.end(), 0.0);
  if (mass == 0.0) return out;

  std::vector<double> y(soft_label.begin(), soft_label.end());
  if (std::abs(mass - 1.0) > 1e-6) {
    for (auto& v : y) v /= mass;
    out.renormalized = true;
  }

  // Max over the support of y only; classes with y_k = 0 do not contribute.
  double m = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < k_count; ++k)
    if (y[k] > 0.0) m = std::max(m, z[k]);

  double s = 0.0;
  for (std::size_t k = 0; k < k_count; ++k) {
    if (y[k] > 0.0) {
      out.grad[k] = y[k] * std::exp(z[k] - m);
      s += out.grad[k];
    }
  }
  double log_lambda_term = 0.0;
  for (std::size_t k = 0; k < k_count; ++k) {
    out.grad[k] = -out.grad[k] / s;
    if (y[k] > 0.0) log_lambda_term += y[k] * std::log(lambdas[k]);
  }
  out.value = -(m + std::log(s)) + log_lambda_term;
  return out;
}

double anneal_beta(int epoch) {
  if (epoch < 0) throw ContractViolation("anneal_beta: negative epoch");
  if (epoch > 5) return 0.0;
  return 10.0 / (1.0 + static_cast<double>(epoch) * epoch);
}

double annealed_target_loss(double l_ebm, double r_ebm, double beta) {
  if (beta < 0.0) throw ContractViolation("annealed_target_loss: beta must be >= 0");
  if (beta == 0.0) return l_ebm;
  return (l_ebm + beta * r_ebm) / (1.0 + beta);
}

SgldResult sgld_chain(std::span<const double> x0, const EnergyInputGrad& grad,
                      const SgldOptions& opts, Rng& rng) {
  if (opts.steps < 0) throw ContractViolation("sgld: negative step count");
  SgldResult out{std::vector<double>(x0.begin(), x0.end()), false};
  std::vector<double> next(out.x.size());
  for (int s = 0; s < opts.steps; ++s) {
    const auto g = grad(out.x);
    for (std::size_t d = 0; d < next.size(); ++d) {
      double v = out.x[d] - 0.5 * opts.step_size * g[d];
      if (opts.noise_scale != 0.0) v += opts.noise_scale * rng.normal();
      next[d] = v;
    }
    if (!std::all_of(next.begin(), next.end(), [](double v) { return std::isfinite(v); })) {
      out.aborted = true;
      break;
    }
    out.x = next;
  }
  return out;
}

SgldResult sgld_negative_sample(const ModelParams& params, std::span<const double> x0,
                                const SgldOptions& opts, Rng& rng) {
  auto grad = [&params](std::span<const double> x) {
    std::vector<double> dx;
    try {
      const auto trace = forward_trace(params, x);
      auto scratch = GradientSet::zeros_like(params);
      backprop(params, trace, energy_grad_logits(trace.logits()), scratch, &dx);
    } catch (const NumericalError&) {
      dx.assign(x.size(), std::numeric_limits<double>::quiet_NaN());
    }
    return dx;
  };
  return sgld_chain(x0, grad, opts, rng);
}

}  // namespace ebst
