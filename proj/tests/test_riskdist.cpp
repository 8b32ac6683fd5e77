#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "threshtest/math.hpp"
#include "threshtest/riskdist.hpp"

using namespace threshtest;

namespace {

const std::vector<double> kPhiGrid = {0.005, 0.05, 0.3, 0.7};
const std::vector<double> kDeltaGrid = {0.1, 1.0, 2.0, 4.0};
const std::vector<double> kZGrid = {0.01, 0.1, 0.5, 0.9};

// Independent integration route for the density tests: composite Simpson in
// logit space, where the density transforms to a smooth Gaussian mixture.
double integrate_density(const DiscriminantParams& params, double lo, double hi,
                         bool weight_by_p) {
  const double a = logit(lo);
  const double b = logit(hi);
  const int panels = 4000;
  const double h = (b - a) / panels;
  const auto integrand = [&](double x) {
    const double p = logistic(x);
    const double jac = p * (1.0 - p);
    return (weight_by_p ? p : 1.0) * density(params, p) * jac;
  };
  double acc = 0.0;
  for (int i = 0; i < panels; ++i) {
    const double x0 = a + i * h;
    acc += (h / 6.0) *
           (integrand(x0) + 4.0 * integrand(x0 + 0.5 * h) + integrand(x0 + h));
  }
  return acc;
}

}  // namespace

TEST_CASE("parameter invariants are enforced") {
  CHECK_THROWS_AS(DiscriminantParams(0.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(DiscriminantParams(1.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(DiscriminantParams(0.5, -0.1), std::invalid_argument);
  CHECK_THROWS_AS(Threshold(0.0), std::invalid_argument);
  CHECK_THROWS_AS(Threshold(1.0), std::invalid_argument);
  CHECK_NOTHROW(DiscriminantParams(0.5, 0.0));
}

TEST_CASE("signal_cutoff closed form and round trip") {
  // Both logit terms vanish: cutoff is delta/2 + 0.
  CHECK(signal_cutoff(DiscriminantParams(0.5, 2.0), Threshold(0.5)) ==
        doctest::Approx(1.0).epsilon(1e-14));
  // Matching z and phi leaves delta/2.
  CHECK(signal_cutoff(DiscriminantParams(0.1, 1.0), Threshold(0.1)) ==
        doctest::Approx(0.5).epsilon(1e-14));

  // Round trip p(signal_cutoff(z)) = z to 1e-12 across the grid.
  for (double phi : kPhiGrid) {
    for (double delta : kDeltaGrid) {
      for (double z : kZGrid) {
        const DiscriminantParams params(phi, delta);
        const double s = signal_cutoff(params, Threshold(z));
        const double p = logistic(logit(phi) + delta * s - 0.5 * delta * delta);
        CHECK(std::fabs(p - z) <= 1e-12);
      }
    }
  }
  CHECK_THROWS_AS(signal_cutoff(DiscriminantParams(0.5, 0.0), Threshold(0.5)),
                  std::domain_error);
}

TEST_CASE("ccdf_above and mean_above closed-form spot values") {
  const DiscriminantParams symmetric(0.5, 2.0);
  // Symmetry: Phi(1) + Phi(-1) = 1.
  CHECK(ccdf_above(symmetric, Threshold(0.5)) == doctest::Approx(0.5).epsilon(1e-14));
  // g = 0.5 * Phi(1) / 0.5 = Phi(1).
  CHECK(mean_above(symmetric, Threshold(0.5)) ==
        doctest::Approx(0.841344746068542949).epsilon(1e-13));

  // z -> 0+: everything is above the threshold, so f -> 1 and g -> phi.
  const DiscriminantParams params(0.3, 1.5);
  CHECK(ccdf_above(params, Threshold(1e-9)) == doctest::Approx(1.0).epsilon(1e-7));
  CHECK(mean_above(params, Threshold(1e-9)) == doctest::Approx(0.3).epsilon(1e-6));
}

TEST_CASE("degenerate delta = 0 behaves as a point mass at phi") {
  const DiscriminantParams degenerate(0.4, 0.0);
  CHECK(ccdf_above(degenerate, Threshold(0.2)) == 1.0);
  CHECK(ccdf_above(degenerate, Threshold(0.4)) == 0.0);
  CHECK(ccdf_above(degenerate, Threshold(0.6)) == 0.0);
  CHECK(mean_above(degenerate, Threshold(0.2)) == 0.4);
  CHECK_THROWS_AS(mean_above(degenerate, Threshold(0.6)), std::domain_error);
  CHECK_THROWS_AS(density(degenerate, 0.4), std::domain_error);
  CHECK_THROWS_AS(quadrature_oracle(degenerate, Threshold(0.2)),
                  std::domain_error);
}

TEST_CASE("closed forms match the quadrature oracle across the 4x4x4 grid") {
  for (double phi : kPhiGrid) {
    for (double delta : kDeltaGrid) {
      for (double z : kZGrid) {
        const DiscriminantParams params(phi, delta);
        const Threshold threshold(z);
        const auto [f_num, g_num] = quadrature_oracle(params, threshold);
        const double f = ccdf_above(params, threshold);
        CHECK(std::fabs(f - f_num) <= 1e-8);
        if (f_num > 1e-12) {
          CHECK(std::fabs(mean_above(params, threshold) - g_num) <= 1e-8);
        }
      }
    }
  }
}

TEST_CASE("oracle spot checks") {
  const auto [f, g] = quadrature_oracle(DiscriminantParams(0.5, 2.0), Threshold(0.5));
  CHECK(f == doctest::Approx(0.5).epsilon(1e-8));
  CHECK(g == doctest::Approx(0.841344746068542949).epsilon(1e-8));

  const auto [f0, g0] =
      quadrature_oracle(DiscriminantParams(0.3, 1.5), Threshold(1e-9));
  CHECK(f0 == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(g0 == doctest::Approx(0.3).epsilon(1e-8));

  // Deep tail stress case.
  const DiscriminantParams tail(0.05, 3.0);
  const auto [ft, gt] = quadrature_oracle(tail, Threshold(0.9));
  CHECK(std::fabs(ccdf_above(tail, Threshold(0.9)) - ft) <= 1e-8);
  CHECK(std::fabs(mean_above(tail, Threshold(0.9)) - gt) <= 1e-8);
}

TEST_CASE("monotonicity: f strictly decreasing, g nondecreasing, g >= max(z, phi)") {
  for (double phi : kPhiGrid) {
    for (double delta : {0.5, 1.5, 3.0}) {
      const DiscriminantParams params(phi, delta);
      double prev_f = 2.0;
      double prev_g = 0.0;
      for (double z = 0.02; z < 0.99; z += 0.02) {
        const double f = ccdf_above(params, Threshold(z));
        const double g = mean_above(params, Threshold(z));
        CHECK(f < prev_f);
        CHECK(g >= prev_g - 1e-13);
        CHECK(g >= z - 1e-12);
        CHECK(g >= phi - 1e-12);
        prev_f = f;
        prev_g = g;
      }
    }
  }
}

TEST_CASE("delta -> 0 limit approaches the step function at phi") {
  const DiscriminantParams nearly_degenerate(0.4, 1e-4);
  // Away from the step at z = phi the ccdf is within 1e-3 of the limit.
  CHECK(ccdf_above(nearly_degenerate, Threshold(0.3)) ==
        doctest::Approx(1.0).epsilon(1e-3));
  CHECK(ccdf_above(nearly_degenerate, Threshold(0.5)) ==
        doctest::Approx(0.0).scale(1.0).epsilon(1e-3));
}

TEST_CASE("density normalizes, reproduces the mean, and is consistent with the ccdf") {
  const DiscriminantParams params(0.3, 1.5);
  CHECK(integrate_density(params, 1e-9, 1.0 - 1e-9, false) ==
        doctest::Approx(1.0).epsilon(1e-8));
  CHECK(integrate_density(params, 1e-9, 1.0 - 1e-9, true) ==
        doctest::Approx(0.3).epsilon(1e-8));
  CHECK(integrate_density(params, 0.2, 1.0 - 1e-9, false) ==
        doctest::Approx(ccdf_above(params, Threshold(0.2))).epsilon(1e-8));

  const DiscriminantParams skewed(0.05, 2.0);
  CHECK(integrate_density(skewed, 1e-12, 1.0 - 1e-9, false) ==
        doctest::Approx(1.0).epsilon(1e-7));
  CHECK(integrate_density(skewed, 1e-12, 1.0 - 1e-9, true) ==
        doctest::Approx(0.05).epsilon(1e-7));
}
