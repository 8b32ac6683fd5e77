#pragma once

#include <cstdint>
#include <vector>

// Scalar special functions and small statistical helpers shared across the
// library. Everything here is a pure function of its arguments.

namespace threshtest {

inline constexpr double kPi = 3.14159265358979323846;
// Guard applied before logit() so upstream rounding noise cannot produce
// infinities; this is a numerical guard, not a semantic clamp.
inline constexpr double kProbEps = 1e-12;

// Complementary error function, rational approximation (Cody-style three
// branch scheme). Relative accuracy ~1e-15 on the primary branches; absolute
// accuracy far below 1e-12 everywhere.
double erfc(double x);
double erf(double x);

// Standard normal CDF Phi(x) = 0.5 * erfc(-x / sqrt(2)). Computed through the
// complement so deep tails keep full relative precision (no cancellation).
double normal_cdf(double x);
double normal_pdf(double x);
double log_normal_pdf(double x, double mean, double sd);

// logit with inputs clamped to [kProbEps, 1 - kProbEps].
double logit(double p);
// Numerically stable inverse logit.
double logistic(double x);

// log(n!) via lgamma.
double log_factorial(std::int64_t n);
double log_choose(std::int64_t n, std::int64_t k);

// log pmf of Poisson(mean) at k. mean == 0 is allowed (point mass at 0).
double poisson_log_pmf(std::int64_t k, double mean);
// log pmf of Binomial(n, p) at k, with exact handling of the p in {0,1}
// boundaries.
double binomial_log_pmf(std::int64_t k, std::int64_t n, double p);

// Sample quantile with linear interpolation between order statistics
// (the common "type 7" convention). q in [0, 1]; data need not be sorted.
double quantile(std::vector<double> values, double q);

double mean(const std::vector<double>& values);
// Unbiased sample variance; 0 for fewer than two values.
double variance(const std::vector<double>& values);

}  // namespace threshtest
