#pragma once

#include <cstdint>
#include <limits>
#include <string_view>

namespace polyspec {

// SplitMix64 finalizer; a bijective 64-bit mixer.
std::uint64_t mix64(std::uint64_t x);

// Derives an independent master seed for a named sub-experiment, so that
// e.g. the IDS ensemble never shares draws with the LES ensemble.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag);

// Counter-based generator keyed by (seed, realization index). Output k is a
// pure function of (seed, index, k), so realizations can be produced in any
// order or on any thread with identical results.
class Substream {
 public:
  using result_type = std::uint64_t;

  Substream(std::uint64_t seed, std::uint64_t index);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() { return next(); }
  result_type next();

  // Uniform on [0, 1) with 53 random bits.
  double uniform();
  bool bernoulli(double p) { return uniform() < p; }

  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace polyspec
