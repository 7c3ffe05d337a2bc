// Copyright 2026 The rffedge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

namespace rff {

// xoshiro256** seeded through SplitMix64. Every derived quantity (uniforms,
// Gaussians, bounded integers) is defined in terms of next_u64() here, so a
// seed reproduces the same stream on any platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0);

  std::uint64_t seed() const noexcept { return seed_; }

  std::uint64_t next_u64() noexcept;

  // Unbiased integer in [0, bound) by rejection; bound must be > 0.
  std::uint64_t below(std::uint64_t bound) noexcept;

  // 53-bit uniform double in [0, 1).
  double uniform() noexcept;
  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

  // 24-bit uniform float in [0, 1).
  float uniform_float() noexcept;

  // Standard normal via the Box-Muller transform (one draw per pair cached).
  double normal() noexcept;

  // Independent child stream keyed by (this seed, stream). Does not advance
  // this generator.
  Rng fork(std::uint64_t stream) const noexcept;

 private:
  std::uint64_t seed_;
  std::array<std::uint64_t, 4> state_{};
  bool has_spare_normal_ = false;
  double spare_normal_ = 0.0;
};

// Uniformly random permutation of 0..n-1 (Fisher-Yates, high index first).
std::vector<std::size_t> rng_permutation(Rng& rng, std::size_t n);

}  // namespace rff
