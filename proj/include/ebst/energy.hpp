// Copyright 2026 The ebst Authors
// SPDX-License-Identifier: Apache-2.0

// Energy of a classifier's input, E(x) = -LogSumExp_k f(x)[k], and the
// target-domain objectives built from it.

#pragma once

#include <functional>
#include <span>
#include <vector>

#include "ebst/nn.hpp"
#include "ebst/rng.hpp"

namespace ebst {

/// E(z) = -log sum_k exp(z_k), max-subtracted.
double energy(std::span<const double> z);

/// dE/dz = -softmax(z).
std::vector<double> energy_grad_logits(std::span<const double> z);

/// alpha * sum_t E_t: the regularizer's contribution to the minimized loss.
double rebm_target_term(std::span<const double> energies, double alpha);

struct EbmLoss {
  double value = 0.0;
  /// d(value)/dz. The log-lambda part is constant and has no gradient.
  std::vector<double> grad;
  /// The soft label was rescaled because its sum was off by more than 1e-6.
  bool renormalized = false;
};

/// -log sum_k yhat_k exp(z_k) + sum_k yhat_k log lambda_k.
/// yhat is treated as a constant. An all-zero yhat gives 0.
EbmLoss ebm_loss(std::span<const double> z, std::span<const double> soft_label,
                 std::span<const double> lambdas);

/// 10 / (1 + N^2) for N <= 5, else 0.
double anneal_beta(int epoch);

/// (l_ebm + beta * r_ebm) / (1 + beta).
double annealed_target_loss(double l_ebm, double r_ebm, double beta);

struct SgldOptions {
  int steps = 20;
  double step_size = 1.0;
  double noise_scale = 0.01;
};

struct SgldResult {
  std::vector<double> x;
  bool aborted = false;  // chain hit a non-finite state; x is the last finite one
};

/// dE/dx for an arbitrary energy surface.
using EnergyInputGrad = std::function<std::vector<double>(std::span<const double> x)>;

/// x <- x - (step_size / 2) * dE/dx + noise_scale * xi, xi ~ N(0, I).
SgldResult sgld_chain(std::span<const double> x0, const EnergyInputGrad& grad,
                      const SgldOptions& opts, Rng& rng);

/// SGLD chain on the classifier's own energy, started from x0.
SgldResult sgld_negative_sample(const ModelParams& params, std::span<const double> x0,
                                const SgldOptions& opts, Rng& rng);

}  // namespace ebst
