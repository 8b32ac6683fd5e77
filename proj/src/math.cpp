#include "threshtest/math.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace threshtest {

namespace {

// Coefficients from W. J. Cody's rational Chebyshev approximations for
// erf/erfc (SPECFUN). Three branches: |x| < 0.46875, 0.46875 <= x <= 4,
// and x > 4.
constexpr double kErfA[5] = {
    3.16112374387056560e0, 1.13864154151050156e2, 3.77485237685302021e2,
    3.20937758913846947e3, 1.85777706184603153e-1};
constexpr double kErfB[4] = {2.36012909523441209e1, 2.44024637934444173e2,
                             1.28261652607737228e3, 2.84423683343917062e3};
constexpr double kErfC[9] = {
    5.64188496988670089e-1, 8.88314979438837594e0, 6.61191906371416295e1,
    2.98635138197400131e2,  8.81952221241769090e2, 1.71204761263407058e3,
    2.05107837782607147e3,  1.23033935479799725e3, 2.15311535474403846e-8};
constexpr double kErfD[8] = {1.57449261107098347e1, 1.17693950891312499e2,
                             5.37181101862009858e2, 1.62138957456669019e3,
                             3.29079923573345963e3, 4.36261909014324716e3,
                             3.43936767414372164e3, 1.23033935480374942e3};
constexpr double kErfP[6] = {3.05326634961232344e-1, 3.60344899949804439e-1,
                             1.25781726111229246e-1, 1.60837851487422766e-2,
                             6.58749161529837803e-4, 1.63153871373020978e-2};
constexpr double kErfQ[5] = {2.56852019228982242e0, 1.87295284992346047e0,
                             5.27905102951428412e-1, 6.05183413124413191e-2,
                             2.33520497626869185e-3};
constexpr double kInvSqrtPi = 5.6418958354775628695e-1;

double erfc_large(double x) {
  // x > 4: erfc(x) = exp(-x^2)/x * (1/sqrt(pi) + R(1/x^2)) with R rational.
  const double z = 1.0 / (x * x);
  double num = kErfP[5] * z;
  double den = z;
  for (int i = 0; i < 4; ++i) {
    num = (num + kErfP[i]) * z;
    den = (den + kErfQ[i]) * z;
  }
  num += kErfP[4];
  den += kErfQ[4];
  double r = z * num / den;
  r = (kInvSqrtPi - r) / x;
  // exp(-x^2) split into exact and residual parts to limit rounding error.
  const double xsq = std::floor(x * 16.0) / 16.0;
  const double del = (x - xsq) * (x + xsq);
  return std::exp(-xsq * xsq) * std::exp(-del) * r;
}

double erfc_mid(double x) {
  // 0.46875 <= x <= 4.
  double num = kErfC[8] * x;
  double den = x;
  for (int i = 0; i < 7; ++i) {
    num = (num + kErfC[i]) * x;
    den = (den + kErfD[i]) * x;
  }
  num += kErfC[7];
  den += kErfD[7];
  const double r = num / den;
  const double xsq = std::floor(x * 16.0) / 16.0;
  const double del = (x - xsq) * (x + xsq);
  return std::exp(-xsq * xsq) * std::exp(-del) * r;
}

double erf_small(double x) {
  // |x| < 0.46875.
  const double z = x * x;
  double num = kErfA[4] * z;
  double den = z;
  for (int i = 0; i < 3; ++i) {
    num = (num + kErfA[i]) * z;
    den = (den + kErfB[i]) * z;
  }
  return x * (num + kErfA[3]) / (den + kErfB[3]);
}

}  // namespace

double erf(double x) {
  const double ax = std::fabs(x);
  if (ax < 0.46875) return erf_small(x);
  return x > 0 ? 1.0 - erfc(x) : erfc(-x) - 1.0;
}

double erfc(double x) {
  if (std::isnan(x)) return x;
  const double ax = std::fabs(x);
  double r;
  if (ax < 0.46875) {
    return 1.0 - erf_small(x);
  } else if (ax <= 4.0) {
    r = erfc_mid(ax);
  } else if (ax < 26.6) {
    r = erfc_large(ax);
  } else {
    r = 0.0;
  }
  return x >= 0 ? r : 2.0 - r;
}

double normal_cdf(double x) { return 0.5 * erfc(-x * 0.7071067811865475244); }

double normal_pdf(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * kPi);
}

double log_normal_pdf(double x, double mean, double sd) {
  const double z = (x - mean) / sd;
  return -0.5 * z * z - std::log(sd) - 0.5 * std::log(2.0 * kPi);
}

double logit(double p) {
  p = std::clamp(p, kProbEps, 1.0 - kProbEps);
  return std::log(p) - std::log1p(-p);
}

double logistic(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double log_factorial(std::int64_t n) {
  if (n < 0) throw std::domain_error("log_factorial: negative argument");
  return std::lgamma(static_cast<double>(n) + 1.0);
}

double log_choose(std::int64_t n, std::int64_t k) {
  if (k < 0 || k > n) {
    throw std::domain_error("log_choose: k outside [0, n]");
  }
  return log_factorial(n) - log_factorial(k) - log_factorial(n - k);
}

double poisson_log_pmf(std::int64_t k, double mean) {
  if (k < 0 || mean < 0) {
    throw std::domain_error("poisson_log_pmf: negative argument");
  }
  if (mean == 0.0) {
    return k == 0 ? 0.0 : -std::numeric_limits<double>::infinity();
  }
  return static_cast<double>(k) * std::log(mean) - mean - log_factorial(k);
}

double binomial_log_pmf(std::int64_t k, std::int64_t n, double p) {
  if (n < 0 || p < 0.0 || p > 1.0) {
    throw std::domain_error("binomial_log_pmf: invalid parameters");
  }
  if (k < 0 || k > n) return -std::numeric_limits<double>::infinity();
  if (p == 0.0) {
    return k == 0 ? 0.0 : -std::numeric_limits<double>::infinity();
  }
  if (p == 1.0) {
    return k == n ? 0.0 : -std::numeric_limits<double>::infinity();
  }
  return log_choose(n, k) + static_cast<double>(k) * std::log(p) +
         static_cast<double>(n - k) * std::log1p(-p);
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw std::invalid_argument("quantile: empty input");
  if (q < 0.0 || q > 1.0) throw std::invalid_argument("quantile: q outside [0, 1]");
  std::sort(values.begin(), values.end());
  const double h = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(h);
  if (lo + 1 >= values.size()) return values.back();
  const double frac = h - static_cast<double>(lo);
  return values[lo] + frac * (values[lo + 1] - values[lo]);
}

double mean(const std::vector<double>& values) {
  if (values.empty()) throw std::invalid_argument("mean: empty input");
  double s = 0.0;
  for (double v : values) s += v;
  return s / static_cast<double>(values.size());
}

double variance(const std::vector<double>& values) {
  if (values.size() < 2) return 0.0;
  const double m = mean(values);
  double s = 0.0;
  for (double v : values) s += (v - m) * (v - m);
  return s / static_cast<double>(values.size() - 1);
}

}  // namespace threshtest
