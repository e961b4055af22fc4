// Copyright 2026 The ebst Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <numeric>

#include "doctest.h"
#include "ebst/error.hpp"
#include "ebst/metrics.hpp"
#include "helpers.hpp"

using namespace ebst;

TEST_SUITE("metrics") {
  TEST_CASE("accuracy examples") {
    const std::vector<int> t{0, 0, 1, 1};
    const auto same = per_class_accuracy(t, t, 2);
    CHECK(same.per_class == std::vector<double>{1.0, 1.0});
    CHECK(same.mean == 1.0);
    const auto a = per_class_accuracy(std::vector<int>{0, 1, 1, 1}, t, 2);
    CHECK(a.per_class == std::vector<double>{0.5, 1.0});
    CHECK(a.mean == 0.75);
    const auto absent = per_class_accuracy(std::vector<int>{0, 2, 1, 1}, t, 3);
    CHECK(std::isnan(absent.per_class[2]));
    CHECK(absent.mean == 0.75);
    CHECK_THROWS_AS(per_class_accuracy(std::vector<int>{0}, t, 2), ContractViolation);
    CHECK_THROWS_AS(per_class_accuracy(std::vector<int>{0, 0, 0, 5}, t, 2), ContractViolation);
  }

  TEST_CASE("mean accuracy is invariant under relabeling") {
    Rng rng(4);
    for (int trial = 0; trial < 50; ++trial) {
      const int k = 2 + trial % 4;
      std::vector<int> pred(60), truth(60);
      for (auto& v : pred) v = static_cast<int>(rng.uniform() * k);
      for (auto& v : truth) v = static_cast<int>(rng.uniform() * k);
      std::vector<int> perm(static_cast<std::size_t>(k));
      std::iota(perm.begin(), perm.end(), 0);
      std::rotate(perm.begin(), perm.begin() + 1, perm.end());
      std::reverse(perm.begin(), perm.end());
      auto pp = pred, tp = truth;
      for (auto& v : pp) v = perm[static_cast<std::size_t>(v)];
      for (auto& v : tp) v = perm[static_cast<std::size_t>(v)];
      CHECK(per_class_accuracy(pp, tp, k).mean == doctest::Approx(per_class_accuracy(pred, truth, k).mean).epsilon(1e-15));
    }
  }

  TEST_CASE("kl examples") {
    const std::vector<double> half{0.5, 0.5};
    CHECK(marginal_kl(half, half) == 0.0);
    CHECK(marginal_kl(std::vector<double>{1.0, 0.0}, half) == doctest::Approx(13.1223633774043288).epsilon(1e-14));
    CHECK(marginal_kl(std::vector<double>{0.25, 0.75}, half) == doctest::Approx(0.143841036225890464).epsilon(1e-14));
    // Reverse direction: KL(pred || true).
    CHECK(marginal_kl(std::vector<double>{0.25, 0.75}, half, KlDirection::pred_to_true) ==
          doctest::Approx(0.25 * std::log(0.5) + 0.75 * std::log(1.5)).epsilon(1e-14));
    CHECK_THROWS_AS(marginal_kl(half, std::vector<double>{1.0}), ContractViolation);
  }

  TEST_CASE("kl is nonnegative and zero only at equality") {
    Rng rng(10);
    for (int i = 0; i < 2000; ++i) {
      const std::size_t k = 2 + static_cast<std::size_t>(i % 4);
      const auto p = testing::random_prob(rng, k);
      const auto q = testing::random_prob(rng, k);
      CHECK(marginal_kl(p, q) >= 0.0);
      CHECK(marginal_kl(q, q) == 0.0);
    }
    // Over a grid of predictions the minimum sits at the true marginal.
    const std::vector<double> truth{0.3, 0.7};
    double best = 1e9, arg = -1;
    for (int i = 1; i < 100; ++i) {
      const double a = i / 100.0;
      const double v = marginal_kl(std::vector<double>{a, 1 - a}, truth);
      if (v < best) {
        best = v;
        arg = a;
      }
    }
    CHECK(arg == doctest::Approx(0.3));
  }

  TEST_CASE("energy stats") {
    const auto one = energy_stats(std::vector<double>{-1.5});
    CHECK(one.mean == -1.5);
    CHECK(one.min == -1.5);
    CHECK(one.max == -1.5);
    const auto two = energy_stats(std::vector<double>{-1, -3});
    CHECK(two.mean == -2.0);
    CHECK(two.min == -3.0);
    CHECK(two.max == -1.0);
    const std::vector<double> e{-0.5, -7.25, 3.0, -1.0};
    auto r = e;
    std::reverse(r.begin(), r.end());
    CHECK(energy_stats(r).mean == energy_stats(e).mean);
    CHECK(energy_stats(r).min == energy_stats(e).min);
    CHECK_THROWS_AS(energy_stats(std::vector<double>{}), ContractViolation);
  }

  TEST_CASE("evaluator reads hidden labels and skips unknown ones") {
    Layer l{2, 2, {1, 0, 0, 1}, {0, 0}};
    const ModelParams id({l});
    const DomainDataset src({{2, 0}, {0, 2}, {3, 1}}, {0, 1, 1}, 2);
    const auto rs = Evaluator::evaluate(id, src);
    CHECK(rs.per_class_acc == std::vector<double>{1.0, 0.5});
    CHECK(rs.mean_acc == 0.75);
    CHECK(Evaluator::evaluate(id, src.as_target()).mean_acc == 0.75);

    const DomainDataset partial({{2, 0}, {0, 2}}, {0, -1}, 2);
    const auto rp = Evaluator::evaluate(id, partial);
    CHECK(rp.mean_acc == 1.0);
    CHECK(rp.mean_energy == doctest::Approx(-std::log(std::exp(2.0) + 1.0)).epsilon(1e-14));
    CHECK(rp.min_energy == rp.max_energy);
  }
}
