#include <doctest.h>

#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "threshtest/math.hpp"
#include "threshtest/rng.hpp"
#include "threshtest/sampler.hpp"

using namespace threshtest;

namespace {

TargetDensity standard_gaussian(std::size_t dim) {
  TargetDensity t;
  t.dimension = dim;
  t.log_density = [](std::span<const double> q) {
    double acc = 0.0;
    for (double v : q) acc -= 0.5 * v * v;
    return acc;
  };
  t.gradient = [](std::span<const double> q) {
    std::vector<double> g(q.size());
    for (std::size_t i = 0; i < q.size(); ++i) g[i] = -q[i];
    return g;
  };
  return t;
}

// Correlated bivariate Gaussian with unit marginals.
TargetDensity correlated_gaussian(double rho) {
  TargetDensity t;
  t.dimension = 2;
  const double det = 1.0 - rho * rho;
  t.log_density = [rho, det](std::span<const double> q) {
    return -0.5 * (q[0] * q[0] - 2.0 * rho * q[0] * q[1] + q[1] * q[1]) / det;
  };
  t.gradient = [rho, det](std::span<const double> q) {
    return std::vector<double>{-(q[0] - rho * q[1]) / det,
                               -(q[1] - rho * q[0]) / det};
  };
  return t;
}

std::vector<double> collect(const PosteriorDraws& draws, std::size_t dim) {
  std::vector<double> out;
  out.reserve(draws.total_draws());
  for (std::size_t c = 0; c < draws.chains; ++c) {
    for (std::size_t i = 0; i < draws.iterations; ++i) {
      out.push_back(draws.at(c, i, dim));
    }
  }
  return out;
}

}  // namespace

TEST_CASE("leapfrog single step matches the hand-evaluated recurrence") {
  const TargetDensity target = standard_gaussian(1);
  const std::vector<double> q = {1.0};
  const std::vector<double> p = {0.0};
  const std::vector<double> inv_mass = {1.0};
  const LeapfrogState state = leapfrog(target, q, p, 0.1, 1, inv_mass);
  // p_half = -0.05, q' = 0.995, p' = -0.09975.
  CHECK(state.position[0] == doctest::Approx(0.995).epsilon(1e-15));
  CHECK(state.momentum[0] == doctest::Approx(-0.09975).epsilon(1e-15));
  CHECK_FALSE(state.divergent);
}

TEST_CASE("leapfrog zero steps is the identity") {
  const TargetDensity target = standard_gaussian(2);
  const std::vector<double> q = {0.3, -1.2};
  const std::vector<double> p = {0.7, 0.1};
  const std::vector<double> inv_mass = {1.0, 1.0};
  const LeapfrogState state = leapfrog(target, q, p, 0.2, 0, inv_mass);
  CHECK(state.position == q);
  CHECK(state.momentum == p);
}

TEST_CASE("leapfrog is time reversible") {
  const TargetDensity target = correlated_gaussian(0.6);
  const std::vector<double> q = {0.8, -0.4};
  const std::vector<double> p = {-0.3, 0.9};
  const std::vector<double> inv_mass = {1.3, 0.7};
  const LeapfrogState forward = leapfrog(target, q, p, 0.05, 25, inv_mass);
  std::vector<double> negated = forward.momentum;
  for (double& v : negated) v = -v;
  const LeapfrogState back =
      leapfrog(target, forward.position, negated, 0.05, 25, inv_mass);
  for (int i = 0; i < 2; ++i) {
    CHECK(std::fabs(back.position[i] - q[i]) < 1e-10);
    CHECK(std::fabs(-back.momentum[i] - p[i]) < 1e-10);
  }
}

TEST_CASE("leapfrog one-step map has unit Jacobian determinant on a Gaussian") {
  // The map (q, p) -> leapfrog(q, p) is linear for a Gaussian target; build
  // its 4x4 matrix from basis vectors and evaluate the determinant.
  const TargetDensity target = correlated_gaussian(0.5);
  const std::vector<double> inv_mass = {0.8, 1.4};
  const double eps = 0.2;
  const auto apply = [&](const std::vector<double>& in) {
    const std::vector<double> q = {in[0], in[1]};
    const std::vector<double> p = {in[2], in[3]};
    const LeapfrogState s = leapfrog(target, q, p, eps, 1, inv_mass);
    return std::vector<double>{s.position[0], s.position[1], s.momentum[0],
                               s.momentum[1]};
  };
  double m[4][4];
  for (int j = 0; j < 4; ++j) {
    std::vector<double> basis(4, 0.0);
    basis[j] = 1.0;
    const auto out = apply(basis);  // linear map: no offset at the origin
    for (int i = 0; i < 4; ++i) m[i][j] = out[i];
  }
  // 4x4 determinant by elimination.
  double det = 1.0;
  for (int c = 0; c < 4; ++c) {
    int pivot = c;
    for (int r = c + 1; r < 4; ++r) {
      if (std::fabs(m[r][c]) > std::fabs(m[pivot][c])) pivot = r;
    }
    if (pivot != c) {
      for (int k = 0; k < 4; ++k) std::swap(m[c][k], m[pivot][k]);
      det = -det;
    }
    det *= m[c][c];
    for (int r = c + 1; r < 4; ++r) {
      const double f = m[r][c] / m[c][c];
      for (int k = c; k < 4; ++k) m[r][k] -= f * m[c][k];
    }
  }
  CHECK(det == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("energy error stays bounded over a long trajectory") {
  const TargetDensity target = standard_gaussian(2);
  std::vector<double> q = {1.0, -0.5};
  std::vector<double> p = {0.4, 0.8};
  const std::vector<double> inv_mass = {1.0, 1.0};
  const auto energy = [&](const std::vector<double>& qq,
                          const std::vector<double>& pp) {
    double kinetic = 0.0;
    for (double v : pp) kinetic += 0.5 * v * v;
    return -target.log_density(qq) + kinetic;
  };
  const double h0 = energy(q, p);
  double worst = 0.0;
  for (int block = 0; block < 100; ++block) {
    const LeapfrogState s = leapfrog(target, q, p, 0.1, 100, inv_mass);
    q = s.position;
    p = s.momentum;
    worst = std::max(worst, std::fabs(energy(q, p) - h0));
  }
  CHECK(worst < 0.02);  // bounded oscillation, no drift over 1e4 steps
}

TEST_CASE("divergence is flagged on non-finite gradients") {
  TargetDensity target;
  target.dimension = 1;
  target.log_density = [](std::span<const double> q) {
    return q[0] < 1.0 ? 0.0 : -std::numeric_limits<double>::infinity();
  };
  target.gradient = [](std::span<const double> q) {
    return std::vector<double>{
        q[0] < 1.0 ? 0.0 : std::numeric_limits<double>::quiet_NaN()};
  };
  const std::vector<double> inv_mass = {1.0};
  const LeapfrogState s =
      leapfrog(target, std::vector<double>{0.0}, std::vector<double>{10.0},
               0.5, 4, inv_mass);
  CHECK(s.divergent);
}

TEST_CASE("sampler recovers a standard 2-D Gaussian") {
  SamplerConfig config;
  config.chains = 4;
  config.warmup_iterations = 500;
  config.sampling_iterations = 1000;
  config.seed = 7;
  const PosteriorDraws draws = run_chains(standard_gaussian(2), config);
  REQUIRE(draws.total_draws() == 4000);

  const Diagnostics diag = diagnostics(draws);
  for (std::size_t d = 0; d < 2; ++d) {
    const std::vector<double> values = collect(draws, d);
    const double m = mean(values);
    const double v = variance(values);
    const double mcse = std::sqrt(v / diag.parameters[d].ess);
    CHECK(std::fabs(m - 0.0) <= 4.0 * mcse);
    CHECK(v == doctest::Approx(1.0).epsilon(0.10));
    CHECK(diag.parameters[d].rhat < 1.01);
  }
}

TEST_CASE("sampler recovers the correlation of a rho = 0.9 Gaussian") {
  SamplerConfig config;
  config.chains = 4;
  config.warmup_iterations = 500;
  config.sampling_iterations = 1000;
  config.seed = 11;
  const PosteriorDraws draws = run_chains(correlated_gaussian(0.9), config);
  const std::vector<double> x = collect(draws, 0);
  const std::vector<double> y = collect(draws, 1);
  const double mx = mean(x);
  const double my = mean(y);
  double cov = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) cov += (x[i] - mx) * (y[i] - my);
  cov /= static_cast<double>(x.size() - 1);
  const double corr = cov / std::sqrt(variance(x) * variance(y));
  CHECK(std::fabs(corr - 0.9) < 0.05);
  CHECK(diagnostics(draws).max_rhat() < 1.02);
}

TEST_CASE("acceptance rate lands near the adaptation target") {
  SamplerConfig config;
  config.chains = 2;
  config.warmup_iterations = 600;
  config.sampling_iterations = 800;
  config.seed = 3;
  config.target_acceptance = 0.8;
  const PosteriorDraws draws = run_chains(standard_gaussian(3), config);
  for (const auto& info : draws.chain_info) {
    CHECK(info.mean_acceptance >= 0.7);
    CHECK(info.mean_acceptance <= 0.9);
  }
}

TEST_CASE("fixed seed gives bit-identical draws") {
  SamplerConfig config;
  config.chains = 2;
  config.warmup_iterations = 200;
  config.sampling_iterations = 300;
  config.seed = 123;
  const TargetDensity target = correlated_gaussian(0.5);
  const PosteriorDraws a = run_chains(target, config);
  const PosteriorDraws b = run_chains(target, config);
  CHECK(a.values == b.values);
  // Thread count must not change the draws either.
  SamplerConfig serial = config;
  serial.threads = 1;
  const PosteriorDraws c = run_chains(target, serial);
  CHECK(a.values == c.values);
}

TEST_CASE("explicit init must be finite and dimension-checked") {
  SamplerConfig config;
  config.chains = 1;
  config.warmup_iterations = 10;
  config.sampling_iterations = 10;
  CHECK_THROWS_AS(
      run_chains(standard_gaussian(2), config, std::vector<double>{1.0}),
      std::invalid_argument);

  // A target with no finite region anywhere near the init window fails
  // after bounded retries.
  TargetDensity hopeless;
  hopeless.dimension = 1;
  hopeless.log_density = [](std::span<const double>) {
    return -std::numeric_limits<double>::infinity();
  };
  hopeless.gradient = [](std::span<const double>) {
    return std::vector<double>{0.0};
  };
  CHECK_THROWS_WITH_AS(run_chains(hopeless, config),
                       doctest::Contains("no finite initial density"),
                       std::runtime_error);
}

TEST_CASE("diagnostics on iid normal chains") {
  Rng rng(31);
  PosteriorDraws draws;
  draws.chains = 4;
  draws.iterations = 500;
  draws.dimension = 2;
  for (std::size_t c = 0; c < 4; ++c) {
    for (std::size_t i = 0; i < 500; ++i) {
      draws.values.push_back(rng.normal());
      draws.values.push_back(3.0 + 2.0 * rng.normal());
      draws.log_densities.push_back(0.0);
      draws.divergent.push_back(0);
    }
  }
  const Diagnostics diag = diagnostics(draws);
  for (const auto& p : diag.parameters) {
    CHECK(p.rhat >= 0.99);
    CHECK(p.rhat <= 1.02);
    CHECK(p.ess == doctest::Approx(2000.0).epsilon(0.25));
  }
  CHECK(diag.divergences == 0);
}

TEST_CASE("diagnostics flag non-mixing and degenerate chains") {
  PosteriorDraws split_apart;
  split_apart.chains = 2;
  split_apart.iterations = 200;
  split_apart.dimension = 1;
  Rng rng(9);
  for (std::size_t c = 0; c < 2; ++c) {
    const double offset = c == 0 ? 10.0 : -10.0;
    for (std::size_t i = 0; i < 200; ++i) {
      split_apart.values.push_back(offset + 0.1 * rng.normal());
      split_apart.log_densities.push_back(0.0);
      split_apart.divergent.push_back(0);
    }
  }
  CHECK(diagnostics(split_apart).parameters[0].rhat > 1.1);

  PosteriorDraws constant;
  constant.chains = 2;
  constant.iterations = 100;
  constant.dimension = 1;
  constant.values.assign(200, 4.2);
  constant.log_densities.assign(200, 0.0);
  constant.divergent.assign(200, 0);
  const Diagnostics diag = diagnostics(constant);
  CHECK(std::isnan(diag.parameters[0].rhat));
  CHECK(std::isnan(diag.parameters[0].ess));

  PosteriorDraws single = constant;
  single.chains = 1;
  single.iterations = 200;
  CHECK_THROWS_AS(diagnostics(single), std::invalid_argument);
}
