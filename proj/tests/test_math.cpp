#include <doctest.h>

#include <cmath>
#include <limits>

#include "threshtest/math.hpp"

using namespace threshtest;

namespace {

// Reference values computed with 40-digit arithmetic (mpmath), frozen here.
struct PhiRef {
  double x;
  double phi;
};
constexpr PhiRef kPhiReference[] = {
    {0.00, 0.5},
    {0.10, 0.539827837277028984},
    {0.25, 0.598706325682923724},
    {-0.30, 0.382088577811047367},
    {0.50, 0.691462461274013104},
    {-0.50, 0.308537538725986896},
    {0.75, 0.773372647623131801},
    {1.00, 0.841344746068542949},
    {-1.00, 0.158655253931457051},
    {1.50, 0.933192798731141934},
    {-1.50, 0.066807201268858066},
    {2.00, 0.977249868051820793},
    {-2.00, 0.0227501319481792072},
    {2.50, 0.993790334674223865},
    {-2.50, 0.00620966532577613517},
    {3.00, 0.998650101968369905},
    {-3.00, 0.00134989803163009453},
    {3.50, 0.999767370920964475},
    {-4.00, 0.0000316712418331199213},
    {4.50, 0.99999660232687527},
    {-5.00, 2.86651571879193912e-7},
    {5.50, 0.999999981010437534},
    {-6.00, 9.86587645037698141e-10},
    {6.50, 0.999999999959839994},
    {-7.00, 1.279812543885835e-12},
    {7.50, 0.999999999999968091},
    {-8.00, 6.22096057427178412e-16},
    {8.00, 0.999999999999999378},
};

}  // namespace

TEST_CASE("normal_cdf matches high-precision reference to 1e-12 over |x| <= 8") {
  for (const auto& ref : kPhiReference) {
    CHECK(std::fabs(normal_cdf(ref.x) - ref.phi) <= 1e-12);
  }
  // Denser sweep: symmetry and monotonicity.
  double prev = 0.0;
  for (double x = -8.0; x <= 8.0; x += 0.03125) {
    const double p = normal_cdf(x);
    CHECK(std::fabs(p + normal_cdf(-x) - 1.0) < 1e-14);
    CHECK(p >= prev);
    prev = p;
  }
}

TEST_CASE("normal_cdf deep tails keep relative precision") {
  // Phi(-20) = erfc(20/sqrt(2))/2; reference from mpmath.
  const double phi20 = 2.7536241186062336951e-89;
  CHECK(normal_cdf(-20.0) == doctest::Approx(phi20).epsilon(1e-10));
  CHECK(normal_cdf(20.0) == 1.0);
}

TEST_CASE("logit clamps noisy inputs instead of overflowing") {
  CHECK(std::isfinite(logit(0.0)));
  CHECK(std::isfinite(logit(1.0)));
  CHECK(logit(0.5) == doctest::Approx(0.0));
  CHECK(logit(logistic(3.7)) == doctest::Approx(3.7).epsilon(1e-12));
}

TEST_CASE("logistic is stable for large magnitudes") {
  CHECK(logistic(800.0) == 1.0);
  CHECK(logistic(-800.0) == doctest::Approx(0.0));
  CHECK(logistic(0.0) == 0.5);
}

TEST_CASE("log_factorial agrees with exact summation") {
  double acc = 0.0;
  for (int n = 1; n <= 30; ++n) {
    acc += std::log(static_cast<double>(n));
    CHECK(log_factorial(n) == doctest::Approx(acc).epsilon(1e-13));
  }
  CHECK(log_factorial(0) == 0.0);
}

TEST_CASE("count pmfs handle boundaries") {
  CHECK(poisson_log_pmf(0, 0.0) == 0.0);
  CHECK(poisson_log_pmf(3, 0.0) == -std::numeric_limits<double>::infinity());
  CHECK(binomial_log_pmf(0, 0, 0.3) == 0.0);
  CHECK(binomial_log_pmf(5, 5, 1.0) == 0.0);
  CHECK(binomial_log_pmf(4, 5, 1.0) == -std::numeric_limits<double>::infinity());
  CHECK(binomial_log_pmf(0, 5, 0.0) == 0.0);
  // Binomial(10, 0.5) at 5: log C(10,5) - 10 log 2.
  const double expected = std::log(252.0) - 10.0 * std::log(2.0);
  CHECK(binomial_log_pmf(5, 10, 0.5) == doctest::Approx(expected).epsilon(1e-13));
}

TEST_CASE("quantile interpolates between order statistics") {
  std::vector<double> v = {4.0, 1.0, 3.0, 2.0};
  CHECK(quantile(v, 0.0) == 1.0);
  CHECK(quantile(v, 1.0) == 4.0);
  CHECK(quantile(v, 0.5) == doctest::Approx(2.5));
  CHECK(quantile(v, 0.25) == doctest::Approx(1.75));
}
