// Copyright 2026 The lpclip Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <initializer_list>

namespace lpclip {

/// Counter-based 64-bit generator: draw n is splitmix64(key + n * golden).
/// Distributions are implemented in-house and do not depend on <random>.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0) noexcept;

  /// Independent stream keyed by (seed, path...).
  static CounterRng derive(std::uint64_t seed, std::initializer_list<std::uint64_t> path) noexcept;

  std::uint64_t next_u64() noexcept;
  /// Uniform in [0, 1) with 53 random bits.
  double uniform() noexcept;
  double uniform(double lo, double hi) noexcept;
  /// Uniform integer in [0, n); n must be > 0.
  std::uint64_t index(std::uint64_t n) noexcept;
  bool bernoulli(double p) noexcept;
  double normal() noexcept;
  std::uint64_t poisson(double mean) noexcept;

  std::uint64_t counter() const noexcept { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double spare_normal_ = 0.0;
  bool has_spare_ = false;
};

std::uint64_t mix64(std::uint64_t x) noexcept;

}  // namespace lpclip
