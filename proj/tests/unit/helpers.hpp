// Copyright 2026 The ebst Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "ebst/nn.hpp"
#include "ebst/rng.hpp"

namespace testing {

// |a - n| / max(|a|, |n|, floor). The floor keeps parameters with a
// vanishing gradient from dominating through rounding noise.
inline double rel_error(double analytic, double numeric, double floor = 1e-6) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

// Central difference of `f` at every flat parameter, step h.
inline std::vector<double> numeric_gradient(const ebst::ModelParams& params,
                                            const std::function<double(const ebst::ModelParams&)>& f,
                                            double h = 1e-5) {
  std::vector<double> g(params.size());
  auto p = params;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double v = params.get(i);
    p.set(i, v + h);
    const double up = f(p);
    p.set(i, v - h);
    const double down = f(p);
    p.set(i, v);
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

inline std::vector<double> random_vector(ebst::Rng& rng, std::size_t n, double lo, double hi) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(lo, hi);
  return v;
}

// Random point of the open simplex.
inline std::vector<double> random_prob(ebst::Rng& rng, std::size_t k) {
  std::vector<double> v(k);
  double s = 0.0;
  for (auto& x : v) s += (x = -std::log(1.0 - rng.uniform()) + 1e-12);
  for (auto& x : v) x /= s;
  return v;
}

}  // namespace testing
