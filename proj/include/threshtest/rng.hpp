#pragma once

#include <cstdint>

// Seeded random number generation used by the sampler and the forward
// simulator. The core generator is SplitMix64 (Steele, Lea & Flood 2014):
// one 64-bit word of state, a fixed additive increment and a finalizing
// mixer. It is fully specified here, so identical seeds give bit-identical
// streams on every platform and the variate algorithms below are likewise
// pinned (no reliance on implementation-defined std::*_distribution).

namespace threshtest {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // Uniform on the open interval (0, 1); 53 usable bits.
  double uniform();
  // Uniform on [lo, hi).
  double uniform(double lo, double hi);
  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);

  // Standard normal via Box-Muller (fresh pair per call, cosine branch).
  double normal();

  // Poisson(mean): sequential inversion for small means, transformed
  // rejection with squeeze (PTRS) for mean >= 10.
  std::int64_t poisson(double mean);

  // Binomial(n, p): Bernoulli summation for small n, otherwise CDF
  // inversion via the pmf recurrence, chunked so (1-p)^chunk never
  // underflows. Additivity of binomials with shared p keeps the chunked
  // draw exact.
  std::int64_t binomial(std::int64_t n, double p);

 private:
  std::int64_t poisson_inversion(double mean);
  std::int64_t poisson_ptrs(double mean);
  std::int64_t binomial_inversion(std::int64_t n, double p);

  std::uint64_t state_;
};

}  // namespace threshtest
