#include "threshtest/rng.hpp"

#include <cmath>
#include <stdexcept>

#include "threshtest/math.hpp"

namespace threshtest {

double Rng::uniform() {
  // (next >> 11) has 53 bits; the half-ulp offset keeps the result in (0,1).
  return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

std::uint64_t Rng::below(std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("Rng::below: n must be positive");
  // Multiply-shift with rejection of the biased remainder band.
  const std::uint64_t threshold = -n % n;
  for (;;) {
    const std::uint64_t r = next_u64();
    if (r >= threshold) return r % n;
  }
}

double Rng::normal() {
  const double u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
}

std::int64_t Rng::poisson(double mean) {
  if (mean < 0 || !std::isfinite(mean)) {
    throw std::invalid_argument("Rng::poisson: mean must be finite and >= 0");
  }
  if (mean == 0.0) return 0;
  return mean < 10.0 ? poisson_inversion(mean) : poisson_ptrs(mean);
}

std::int64_t Rng::poisson_inversion(double mean) {
  const double limit = std::exp(-mean);
  std::int64_t k = 0;
  double prod = uniform();
  while (prod > limit) {
    ++k;
    prod *= uniform();
  }
  return k;
}

std::int64_t Rng::poisson_ptrs(double mean) {
  // Hoermann's transformed rejection with squeeze (PTRS), valid mean >= 10.
  const double b = 0.931 + 2.53 * std::sqrt(mean);
  const double a = -0.059 + 0.02483 * b;
  const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
  const double v_r = 0.9277 - 3.6224 / (b - 2.0);
  const double log_mean = std::log(mean);
  for (;;) {
    double u = uniform() - 0.5;
    double v = uniform();
    const double us = 0.5 - std::fabs(u);
    const double kf = std::floor((2.0 * a / us + b) * u + mean + 0.43);
    if (us >= 0.07 && v <= v_r) return static_cast<std::int64_t>(kf);
    if (kf < 0.0 || (us < 0.013 && v > us)) continue;
    const std::int64_t k = static_cast<std::int64_t>(kf);
    const double lhs =
        std::log(v * inv_alpha / (a / (us * us) + b));
    const double rhs = kf * log_mean - mean - log_factorial(k);
    if (lhs <= rhs) return k;
  }
}

std::int64_t Rng::binomial(std::int64_t n, double p) {
  if (n < 0 || p < 0.0 || p > 1.0 || !std::isfinite(p)) {
    throw std::invalid_argument("Rng::binomial: invalid parameters");
  }
  if (n == 0 || p == 0.0) return 0;
  if (p == 1.0) return n;
  if (p > 0.5) return n - binomial(n, 1.0 - p);
  if (n <= 64) {
    std::int64_t k = 0;
    for (std::int64_t i = 0; i < n; ++i) {
      if (uniform() < p) ++k;
    }
    return k;
  }
  // Largest m with (1-p)^m comfortably above double underflow.
  const double per_trial = std::log1p(-p);
  const auto max_chunk =
      static_cast<std::int64_t>(std::floor(-600.0 / per_trial));
  if (n <= max_chunk) return binomial_inversion(n, p);
  std::int64_t total = 0;
  std::int64_t remaining = n;
  while (remaining > 0) {
    const std::int64_t m = remaining < max_chunk ? remaining : max_chunk;
    total += binomial_inversion(m, p);
    remaining -= m;
  }
  return total;
}

std::int64_t Rng::binomial_inversion(std::int64_t n, double p) {
  const double odds = p / (1.0 - p);
  double pmf = std::exp(static_cast<double>(n) * std::log1p(-p));
  double cdf = pmf;
  const double u = uniform();
  std::int64_t k = 0;
  while (u > cdf && k < n) {
    ++k;
    pmf *= odds * static_cast<double>(n - k + 1) / static_cast<double>(k);
    cdf += pmf;
  }
  return k;
}

}  // namespace threshtest
