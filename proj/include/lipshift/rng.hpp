// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The lipshift Authors

#pragma once

#include <cstdint>
#include <random>

namespace lipshift {

std::uint64_t splitmix64(std::uint64_t x) noexcept;

/// Combines a base seed with a stream index; distinct indices give
/// statistically independent mt19937_64 seeds.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept;

/// Seeded random stream with platform-independent uniform and normal draws.
/// std::normal_distribution is implementation defined, so the Gaussian
/// variates come from Box-Muller on our own uniforms.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform on the open interval (0, 1), 53 bits of resolution.
  double uniform();
  double normal();

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace lipshift
