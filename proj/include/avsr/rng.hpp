// Copyright 2026 The avsr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>

#include "avsr/tensor.hpp"

namespace avsr {

/// Deterministic, splittable PRNG: xoshiro256** whose 256-bit state is
/// expanded from a 64-bit seed with SplitMix64. Child streams are derived
/// with split(), which mixes the parent seed and a stream id through
/// SplitMix64 and never touches the parent state. Normal deviates use the
/// Box-Muller transform so that streams do not depend on the standard
/// library's distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0);

  std::uint64_t seed() const noexcept { return seed_; }

  std::uint64_t next_u64();
  /// Uniform in [0, 1) with 53 bits of precision.
  double uniform();
  double uniform(double lo, double hi);
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);
  double normal();

  /// Independent child stream; identical (seed, stream) pairs give identical children.
  Rng split(std::uint64_t stream) const;

  /// Full state, for checkpointing.
  std::array<std::uint64_t, 4> state() const noexcept { return s_; }
  void set_state(const std::array<std::uint64_t, 4>& s) noexcept {
    s_ = s;
    has_spare_ = false;
  }

 private:
  std::uint64_t seed_;
  std::array<std::uint64_t, 4> s_{};
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t splitmix64(std::uint64_t& state);

/// i.i.d. N(mean, std^2) draws; std must be non-negative.
Tensor rng_normal(Rng& rng, Shape shape, double mean, double std);
Tensor rng_uniform(Rng& rng, Shape shape, double lo, double hi);

}  // namespace avsr
