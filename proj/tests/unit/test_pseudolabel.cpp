// Copyright 2026 The ebst Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <limits>

#include "doctest.h"
#include "ebst/error.hpp"
#include "ebst/pseudolabel.hpp"
#include "helpers.hpp"

using namespace ebst;

namespace {

// Probabilities whose argmax is class 0 with the given confidences.
std::vector<ProbVector> class0_probs(const std::vector<double>& conf) {
  std::vector<ProbVector> out;
  for (double c : conf) out.push_back({c, (1.0 - c) / 2.0, (1.0 - c) / 2.0});
  return out;
}

double brute_force_min(const std::vector<double>& prob, const LambdaVector& lambdas) {
  double best = 0.0;  // the zero vector
  for (std::size_t k = 0; k < prob.size(); ++k) {
    std::vector<double> v(prob.size(), 0.0);
    v[k] = 1.0;
    best = std::min(best, pseudo_label_objective(v, prob, lambdas));
  }
  return best;
}

}  // namespace

TEST_SUITE("pseudolabel") {
  TEST_CASE("lambda examples") {
    const auto l = compute_lambdas(class0_probs({0.9, 0.6, 0.8, 0.4}), 0.5);
    CHECK(l.values[0] == 0.8);
    CHECK(l.values[1] == 1.0);
    CHECK(l.values[2] == 1.0);
    CHECK(compute_lambdas(class0_probs({0.9, 0.6, 0.8, 0.4}), 1.0).values[0] == 0.4);
    CHECK(compute_lambdas(class0_probs({0.9, 0.6, 0.8, 0.4}), 0.2).values[0] == 0.9);
  }

  TEST_CASE("lambda is capped below one") {
    const std::vector<ProbVector> probs{{1.0, 0.0}, {0.0, 1.0}};
    const auto l = compute_lambdas(probs, 0.5);
    CHECK(l.values[0] == kLambdaCap);
    CHECK(hard_pseudo_label(probs[0], l).selected);
  }

  TEST_CASE("lambda errors") {
    CHECK_THROWS_AS(compute_lambdas(std::vector<ProbVector>{}, 0.5), ConfigError);
    CHECK_THROWS_AS(compute_lambdas(class0_probs({0.7}), 0.0), ConfigError);
    CHECK_THROWS_AS(compute_lambdas(class0_probs({0.7}), 1.5), ConfigError);
  }

  TEST_CASE("lambda is non-increasing in portion and order free") {
    Rng rng(3);
    std::vector<ProbVector> probs;
    for (int i = 0; i < 200; ++i) probs.push_back(testing::random_prob(rng, 4));
    LambdaVector prev = compute_lambdas(probs, 0.01);
    for (double p = 0.05; p <= 1.0; p += 0.05) {
      const auto cur = compute_lambdas(probs, p);
      for (std::size_t k = 0; k < 4; ++k) CHECK(cur.values[k] <= prev.values[k]);
      prev = cur;
    }
    auto shuffled = probs;
    std::reverse(shuffled.begin(), shuffled.end());
    std::rotate(shuffled.begin(), shuffled.begin() + 37, shuffled.end());
    CHECK(compute_lambdas(shuffled, 0.35).values == compute_lambdas(probs, 0.35).values);
  }

  TEST_CASE("hard label examples") {
    const LambdaVector half{{0.5, 0.5, 0.5}};
    CHECK(hard_pseudo_label(std::vector<double>{0.3, 0.6, 0.2}, half) == PseudoLabel::one_hot(3, 1));
    const auto low = hard_pseudo_label(std::vector<double>{0.4, 0.35, 0.25}, half);
    CHECK_FALSE(low.selected);
    CHECK(low.vector == std::vector<double>{0, 0, 0});
    CHECK(hard_pseudo_label(std::vector<double>{0.6, 0.4}, LambdaVector{{0.9, 0.3}}) == PseudoLabel::one_hot(2, 1));
  }

  TEST_CASE("hard label ties go to the lowest index and equality does not select") {
    CHECK(hard_pseudo_label(std::vector<double>{0.4, 0.4, 0.2}, LambdaVector{{0.3, 0.3, 0.9}}) ==
          PseudoLabel::one_hot(3, 0));
    CHECK_FALSE(hard_pseudo_label(std::vector<double>{0.5, 0.5}, LambdaVector{{0.5, 0.5}}).selected);
  }

  TEST_CASE("solver attains the brute-force minimum") {
    Rng rng(2024);
    int agree = 0;
    const int trials = 10000;
    for (int i = 0; i < trials; ++i) {
      const std::size_t k_count = 2 + static_cast<std::size_t>(i % 5);
      const auto prob = testing::random_prob(rng, k_count);
      const LambdaVector lam{testing::random_vector(rng, k_count, 1e-3, 1.0)};
      const auto l = hard_pseudo_label(prob, lam);
      CHECK(is_feasible_label(l.vector));
      if (pseudo_label_objective(l.vector, prob, lam) == brute_force_min(prob, lam)) ++agree;
    }
    CHECK(agree == trials);
  }

  TEST_CASE("soft label examples") {
    const LambdaVector half{{0.5, 0.5, 0.5}};
    const auto s = soft_pseudo_label(std::vector<double>{0.3, 0.6, 0.2}, half);
    CHECK(s.selected);
    CHECK(s.vector == std::vector<double>{0.3, 0.6, 0.2});
    CHECK_FALSE(soft_pseudo_label(std::vector<double>{0.34, 0.33, 0.33}, half).selected);
    CHECK(soft_pseudo_label(std::vector<double>{1, 0, 0}, half).vector == std::vector<double>{1, 0, 0});
  }

  TEST_CASE("soft and hard labels select the same samples") {
    Rng rng(77);
    for (int i = 0; i < 2000; ++i) {
      const auto prob = testing::random_prob(rng, 3);
      const LambdaVector lam{testing::random_vector(rng, 3, 0.2, 1.0)};
      const auto s = soft_pseudo_label(prob, lam);
      CHECK(s.selected == hard_pseudo_label(prob, lam).selected);
      CHECK(is_feasible_label(s.vector, 1e-9));
    }
  }

  TEST_CASE("smoothing examples") {
    const auto s = smooth_label(PseudoLabel::one_hot(3, 1), 0.1, 3);
    CHECK(s.vector == std::vector<double>{0.05, 0.9, 0.05});
    CHECK(s.selected);
    CHECK(smooth_label(PseudoLabel::one_hot(3, 2), 0.0, 3) == PseudoLabel::one_hot(3, 2));
    const auto two = smooth_label(PseudoLabel::one_hot(2, 0), 0.2, 2);
    CHECK(two.vector[0] == doctest::Approx(0.8).epsilon(1e-15));
    CHECK(two.vector[1] == doctest::Approx(0.2).epsilon(1e-15));
  }

  TEST_CASE("smoothing rejects non one-hot input") {
    CHECK_THROWS_AS(smooth_label(PseudoLabel::none(3), 0.1, 3), ContractViolation);
    CHECK_THROWS_AS(smooth_label(PseudoLabel{{0.5, 0.5, 0}, true}, 0.1, 3), ContractViolation);
    CHECK_THROWS_AS(smooth_label(PseudoLabel::one_hot(3, 0), 0.1, 4), ContractViolation);
    CHECK_THROWS_AS(smooth_label(PseudoLabel::one_hot(3, 0), 1.0, 3), ContractViolation);
  }

  TEST_CASE("feasibility") {
    CHECK(is_feasible_label(std::vector<double>{0, 0, 0}));
    CHECK(is_feasible_label(std::vector<double>{0.2, 0.8}));
    CHECK_FALSE(is_feasible_label(std::vector<double>{0.2, 0.7}));
    CHECK_FALSE(is_feasible_label(std::vector<double>{-0.2, 1.2}));
  }

  TEST_CASE("selection fraction") {
    PseudoLabelSet s;
    CHECK(s.selection_fraction() == 0.0);
    s.labels = {PseudoLabel::one_hot(2, 0), PseudoLabel::none(2), PseudoLabel::none(2), PseudoLabel::one_hot(2, 1)};
    CHECK(s.selection_fraction() == 0.5);
  }
}
