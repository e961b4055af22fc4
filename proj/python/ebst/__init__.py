# Copyright 2026 The ebst Authors
# SPDX-License-Identifier: Apache-2.0
"""Energy-constrained self-training for unsupervised domain adaptation."""

from ._ebst import (
    ConfigError,
    ContractViolation,
    NumericalError,
    ParseError,
    anneal_beta,
    annealed_target_loss,
    compute_lambdas,
    ebm_loss,
    energy,
    energy_grad_logits,
    gen_two_moons,
    hard_pseudo_label,
    log_sum_exp,
    marginal_kl,
    pseudo_label_objective,
    run_experiment,
    smooth_label,
    soft_pseudo_label,
    softmax,
)

__all__ = [
    "ConfigError",
    "ContractViolation",
    "NumericalError",
    "ParseError",
    "anneal_beta",
    "annealed_target_loss",
    "compute_lambdas",
    "ebm_loss",
    "energy",
    "energy_grad_logits",
    "gen_two_moons",
    "hard_pseudo_label",
    "log_sum_exp",
    "marginal_kl",
    "pseudo_label_objective",
    "run_experiment",
    "smooth_label",
    "soft_pseudo_label",
    "softmax",
]
