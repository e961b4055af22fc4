// Copyright 2026 The ebst Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace ebst {

/// Deterministic random source used everywhere in the library.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the C++
/// standard. The standard distributions are implementation-defined, so the
/// uniform and normal conversions are done here: uniform() takes the top 53
/// bits, normal() is the Box-Muller transform (cosine branch only, one
/// variate per call). Streams for different purposes are derived from one
/// user seed with stream_seed(), so the dataset, the weight init and the
/// SGLD chains never share state.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform in [0, 1).
  double uniform();
  /// Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Standard normal.
  double normal();

 private:
  std::mt19937_64 engine_;
};

/// splitmix64 finalizer.
std::uint64_t mix64(std::uint64_t x);

/// Seed of the named stream `purpose` under the user seed `seed`.
/// Stream names in use: "data/source", "data/target", "data/moons",
/// "init", "sgld".
std::uint64_t stream_seed(std::uint64_t seed, std::string_view purpose);

}  // namespace ebst
