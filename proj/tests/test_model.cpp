#include <doctest.h>

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "threshtest/math.hpp"
#include "threshtest/model.hpp"
#include "threshtest/rng.hpp"

using namespace threshtest;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Independent log-factorial for the likelihood oracle: exact summation.
double log_factorial_oracle(std::int64_t n) {
  double acc = 0.0;
  for (std::int64_t i = 2; i <= n; ++i) acc += std::log(static_cast<double>(i));
  return acc;
}

double poisson_oracle(std::int64_t k, double mean) {
  return static_cast<double>(k) * std::log(mean) - mean - log_factorial_oracle(k);
}

double binomial_oracle(std::int64_t k, std::int64_t n, double p) {
  const double lchoose = log_factorial_oracle(n) - log_factorial_oracle(k) -
                         log_factorial_oracle(n - k);
  return lchoose + static_cast<double>(k) * std::log(p) +
         static_cast<double>(n - k) * std::log1p(-p);
}

// Plausible counts over n_counties x 3 races with real race and county
// heterogeneity (so hierarchical scales are data-identified); not drawn
// from the model, the gradient check only needs valid data.
ObservedCounts synthetic_counts(int n_counties, std::uint64_t seed) {
  ObservedCounts counts;
  counts.race_names = {"white", "black", "hispanic"};
  Rng rng(seed);
  const double race_test_rate[3] = {0.10, 0.06, 0.05};
  const double race_positivity[3] = {0.08, 0.13, 0.17};
  for (int d = 0; d < n_counties; ++d) {
    counts.county_names.push_back("c" + std::to_string(d));
    const double county_scale = std::exp(rng.uniform(-0.6, 0.6));
    for (int r = 0; r < 3; ++r) {
      Cell cell;
      cell.race = r;
      cell.county = d;
      cell.population = 500 + static_cast<std::int64_t>(rng.below(9500));
      cell.tests = rng.poisson(race_test_rate[r] * county_scale *
                               static_cast<double>(cell.population));
      cell.cases = rng.binomial(cell.tests, race_positivity[r]);
      counts.cells.push_back(cell);
    }
  }
  return counts;
}

// A finite point in parameter space with all effects small.
std::vector<double> random_point(const Model& model, Rng& rng, double radius) {
  std::vector<double> theta(model.dimension());
  for (double& v : theta) v = rng.uniform(-radius, radius);
  return theta;
}

void check_gradient(const Model& model, std::span<const double> theta) {
  const std::vector<double> grad = model.grad_log_posterior(theta);
  std::vector<double> point(theta.begin(), theta.end());
  const double h = 1e-5;
  for (std::size_t i = 0; i < point.size(); ++i) {
    const double saved = point[i];
    point[i] = saved + h;
    const double hi = model.log_posterior(point);
    point[i] = saved - h;
    const double lo = model.log_posterior(point);
    point[i] = saved;
    const double fd = (hi - lo) / (2.0 * h);
    const double tol = 1e-5 * std::max({1.0, std::fabs(fd), std::fabs(grad[i])});
    CHECK(std::fabs(grad[i] - fd) <= tol);
  }
}

}  // namespace

TEST_CASE("observed counts invariants") {
  ObservedCounts counts = synthetic_counts(2, 7);
  CHECK_NOTHROW(counts.validate());

  ObservedCounts zero_pop = counts;
  zero_pop.cells[0].population = 0;
  CHECK_THROWS_AS(zero_pop.validate(), std::invalid_argument);

  ObservedCounts inverted = counts;
  inverted.cells[1].cases = inverted.cells[1].tests + 1;
  CHECK_THROWS_AS(inverted.validate(), std::invalid_argument);

  ObservedCounts duplicated = counts;
  duplicated.cells.push_back(duplicated.cells[0]);
  CHECK_THROWS_AS(duplicated.validate(), std::invalid_argument);
}

TEST_CASE("constrain/unconstrain round trip") {
  const Model model(synthetic_counts(5, 11), Hyperparams{});
  Rng rng(3);
  for (int rep = 0; rep < 20; ++rep) {
    const std::vector<double> theta = random_point(model, rng, 2.0);
    const LatentParams latent = model.constrain(theta);
    const std::vector<double> back = model.unconstrain(latent);
    REQUIRE(back.size() == theta.size());
    for (std::size_t i = 0; i < theta.size(); ++i) {
      CHECK(back[i] == doctest::Approx(theta[i]).epsilon(1e-12));
    }
    // County effects really do sum to zero.
    double sum = 0.0;
    for (double e : latent.phi_county) sum += e;
    CHECK(std::fabs(sum) < 1e-12);
  }

  // Zero vector: all effects zero, scales at exp(0) = 1.
  const LatentParams at_zero =
      model.constrain(std::vector<double>(model.dimension(), 0.0));
  for (double e : at_zero.phi_race) CHECK(e == 0.0);
  for (double e : at_zero.zeta_county) CHECK(e == 0.0);
  CHECK(at_zero.sigma_phi == 1.0);
  CHECK(at_zero.sigma_zeta == 1.0);
}

TEST_CASE("exp-transform jacobian enters the posterior exactly once") {
  // With all effects at zero the sigma-dependent part of the posterior is
  // D * logN(0; 0, sigma) + halfnormal(sigma) + log(sigma). Verify the
  // difference between two sigma values analytically.
  const ObservedCounts counts = synthetic_counts(4, 5);
  const Model model(counts, Hyperparams{});
  std::vector<double> a(model.dimension(), 0.0);
  std::vector<double> b = a;
  const auto names = model.parameter_names();
  std::size_t sigma_index = 0;
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == "log_sigma_phi") sigma_index = i;
  }
  a[sigma_index] = 0.25;
  b[sigma_index] = -0.5;
  const double d = static_cast<double>(counts.county_count());
  const auto sigma_part = [&](double log_sigma) {
    const double sigma = std::exp(log_sigma);
    const double county_priors = d * (-std::log(sigma) - 0.5 * std::log(2.0 * kPi));
    const double half_normal = -0.5 * sigma * sigma / 0.25;
    return county_priors + half_normal + log_sigma;
  };
  const double expected = sigma_part(0.25) - sigma_part(-0.5);
  CHECK(model.log_posterior(a) - model.log_posterior(b) ==
        doctest::Approx(expected).epsilon(1e-10));
}

TEST_CASE("pinned-rate cell likelihood matches the independent oracle") {
  const ObservedCounts counts = synthetic_counts(1, 1);
  Cell cell;
  cell.population = 1000;
  cell.tests = 10;
  cell.cases = 5;

  const Model poisson_model(counts, Hyperparams{});
  // f = 0.01 makes the Poisson mean exactly 10.
  const double expected =
      poisson_oracle(10, 10.0) + binomial_oracle(5, 10, 0.5);
  CHECK(poisson_model.cell_log_likelihood(0.01, 0.5, cell) ==
        doctest::Approx(expected).epsilon(1e-12));

  Hyperparams binomial_hp;
  binomial_hp.variant = CountModel::binomial;
  const Model binomial_model(counts, binomial_hp);
  const double expected_binomial =
      binomial_oracle(10, 1000, 0.01) + binomial_oracle(5, 10, 0.5);
  CHECK(binomial_model.cell_log_likelihood(0.01, 0.5, cell) ==
        doctest::Approx(expected_binomial).epsilon(1e-12));
}

TEST_CASE("zero-test cell contributes no case term") {
  const Model model(synthetic_counts(1, 1), Hyperparams{});
  Cell cell;
  cell.population = 1000;
  cell.tests = 0;
  cell.cases = 0;
  // Only the Poisson term Pois(0; n f) = -n f survives.
  CHECK(model.cell_log_likelihood(0.02, 0.5, cell) == doctest::Approx(-20.0));
}

TEST_CASE("binomial variant boundary at f = 1") {
  ObservedCounts counts;
  counts.race_names = {"white"};
  counts.county_names = {"c0"};
  counts.cells = {{0, 0, 100, 100, 10}};
  Hyperparams hp;
  hp.variant = CountModel::binomial;
  const Model model(counts, hp);
  CHECK(model.cell_log_likelihood(1.0, 0.1, counts.cells[0]) ==
        doctest::Approx(binomial_oracle(10, 100, 0.1)).epsilon(1e-12));
  Cell undertested = counts.cells[0];
  undertested.tests = 99;
  CHECK(model.cell_log_likelihood(1.0, 0.1, undertested) == -kInf);
}

TEST_CASE("binomial variant rejects tests above population") {
  ObservedCounts counts;
  counts.race_names = {"white"};
  counts.county_names = {"c0"};
  counts.cells = {{0, 0, 100, 150, 10}};
  Hyperparams hp;
  hp.variant = CountModel::binomial;
  CHECK_THROWS_AS(Model(counts, hp), std::invalid_argument);
  // The poisson variant accepts multiply-tested populations.
  CHECK_NOTHROW(Model(counts, Hyperparams{}));
}

TEST_CASE("f underflow with observed tests returns the -inf sentinel") {
  ObservedCounts counts;
  counts.race_names = {"white"};
  counts.county_names = {"c0"};
  counts.cells = {{0, 0, 1000, 10, 1}};
  const Model model(counts, Hyperparams{});
  std::vector<double> theta(model.dimension(), 0.0);
  theta[0] = -30.0;  // phi -> 1e-13
  theta[2] = 30.0;   // z -> 1
  CHECK(model.log_posterior(theta) == -kInf);

  std::vector<double> bad(model.dimension(), 0.0);
  bad[1] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(model.log_posterior(bad), std::invalid_argument);
  CHECK_THROWS_AS(model.grad_log_posterior(bad), std::invalid_argument);
}

TEST_CASE("analytic gradient matches central finite differences (both variants)") {
  const ObservedCounts counts = synthetic_counts(10, 42);
  for (const CountModel variant : {CountModel::poisson, CountModel::binomial}) {
    Hyperparams hp;
    hp.variant = variant;
    const Model model(counts, hp);
    Rng rng(99);
    int checked = 0;
    while (checked < 50) {
      const std::vector<double> theta = random_point(model, rng, 0.8);
      if (!std::isfinite(model.log_posterior(theta))) continue;
      check_gradient(model, theta);
      ++checked;
    }
  }
}

TEST_CASE("gradient with county delta effects enabled") {
  Hyperparams hp;
  hp.county_delta_effects = true;
  const Model model(synthetic_counts(4, 17), hp);
  Rng rng(5);
  for (int rep = 0; rep < 10; ++rep) {
    const std::vector<double> theta = random_point(model, rng, 0.5);
    if (!std::isfinite(model.log_posterior(theta))) continue;
    check_gradient(model, theta);
  }
}

TEST_CASE("gradient norm vanishes at an interior conditional mode") {
  // Optimizer cross-check of the analytic gradient: safeguarded damped
  // Newton (finite-difference Hessian of the analytic gradient) on the
  // slice with the hierarchical scales held fixed. The conditional
  // posterior given the sigmas is bounded, so an interior mode exists;
  // the joint density is unbounded along the sigma -> 0 funnel spike and
  // has no joint mode to converge to.
  const Model model(synthetic_counts(3, 8), Hyperparams{});
  const std::size_t dim = model.dimension();
  const std::size_t free_dim = dim - 2;  // log_sigma_phi/zeta pinned at 0
  std::vector<double> x(dim, 0.0);

  const auto norm_of = [](std::span<const double> v) {
    double acc = 0.0;
    for (double u : v) acc += u * u;
    return std::sqrt(acc);
  };
  const auto free_grad = [&](const std::vector<double>& p) {
    std::vector<double> g = model.grad_log_posterior(p);
    g.resize(free_dim);
    return g;
  };

  for (int iter = 0; iter < 200; ++iter) {
    const std::vector<double> g = free_grad(x);
    if (norm_of(g) < 1e-8) break;

    // H[i][j] ~ d grad_i / d x_j by central differences.
    const double h = 1e-5;
    std::vector<std::vector<double>> H(free_dim, std::vector<double>(free_dim));
    std::vector<double> p = x;
    for (std::size_t j = 0; j < free_dim; ++j) {
      const double saved = p[j];
      p[j] = saved + h;
      const auto gp = free_grad(p);
      p[j] = saved - h;
      const auto gm = free_grad(p);
      p[j] = saved;
      for (std::size_t i = 0; i < free_dim; ++i) {
        H[i][j] = (gp[i] - gm[i]) / (2.0 * h);
      }
    }
    const double lp0 = model.log_posterior(x);
    double lambda = 1e-8;
    bool moved = false;
    while (lambda < 1e10 && !moved) {
      // Solve (-H + lambda I) step = g by Gaussian elimination.
      std::vector<std::vector<double>> A(free_dim, std::vector<double>(free_dim));
      std::vector<double> b = g;
      for (std::size_t i = 0; i < free_dim; ++i) {
        for (std::size_t j = 0; j < free_dim; ++j) A[i][j] = -H[i][j];
        A[i][i] += lambda;
      }
      bool singular = false;
      for (std::size_t c = 0; c < free_dim && !singular; ++c) {
        std::size_t pivot = c;
        for (std::size_t r = c + 1; r < free_dim; ++r) {
          if (std::fabs(A[r][c]) > std::fabs(A[pivot][c])) pivot = r;
        }
        if (std::fabs(A[pivot][c]) < 1e-14) {
          singular = true;
          break;
        }
        std::swap(A[c], A[pivot]);
        std::swap(b[c], b[pivot]);
        for (std::size_t r = c + 1; r < free_dim; ++r) {
          const double m = A[r][c] / A[c][c];
          for (std::size_t k = c; k < free_dim; ++k) A[r][k] -= m * A[c][k];
          b[r] -= m * b[c];
        }
      }
      if (!singular) {
        std::vector<double> step(free_dim);
        for (std::size_t r = free_dim; r-- > 0;) {
          double acc = b[r];
          for (std::size_t k = r + 1; k < free_dim; ++k) acc -= A[r][k] * step[k];
          step[r] = acc / A[r][r];
        }
        const double step_norm = norm_of(step);
        if (step_norm > 0.5) {
          for (double& v : step) v *= 0.5 / step_norm;
        }
        std::vector<double> candidate = x;
        bool finite = true;
        for (std::size_t i = 0; i < free_dim; ++i) {
          candidate[i] += step[i];
          finite = finite && std::isfinite(candidate[i]);
        }
        if (finite) {
          const double lp1 = model.log_posterior(candidate);
          if (std::isfinite(lp1) && lp1 > lp0) {
            x = candidate;
            moved = true;
          }
        }
      }
      lambda *= 10.0;
    }
    if (!moved) break;  // stationary up to line-search resolution
  }
  CHECK(norm_of(free_grad(x)) < 1e-6);
}

TEST_CASE("log posterior is invariant under cell permutation") {
  ObservedCounts counts = synthetic_counts(6, 21);
  const Model model(counts, Hyperparams{});
  ObservedCounts reversed = counts;
  std::reverse(reversed.cells.begin(), reversed.cells.end());
  const Model model_reversed(reversed, Hyperparams{});
  Rng rng(2);
  for (int rep = 0; rep < 5; ++rep) {
    const std::vector<double> theta = random_point(model, rng, 0.5);
    const double a = model.log_posterior(theta);
    const double b = model_reversed.log_posterior(theta);
    CHECK(a == doctest::Approx(b).epsilon(1e-12));
  }
}

TEST_CASE("empty county carries a prior-only gradient") {
  // Counties 1 and 2 have no cells; perturbing the free effect of county 1
  // trades mass with the derived county 2, so the posterior change is purely
  // the two county priors.
  ObservedCounts counts;
  counts.race_names = {"white", "black"};
  counts.county_names = {"c0", "empty1", "empty2"};
  counts.cells = {{0, 0, 2000, 150, 20}, {1, 0, 1500, 90, 15}};
  const Model model(counts, Hyperparams{});
  const auto names = model.parameter_names();
  std::size_t free_empty1 = 0, log_sigma_zeta = 0;
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == "zeta_county[empty1]") free_empty1 = i;
    if (names[i] == "log_sigma_zeta") log_sigma_zeta = i;
  }
  Rng rng(4);
  std::vector<double> theta(model.dimension());
  for (double& v : theta) v = rng.uniform(-0.5, 0.5);
  const LatentParams latent = model.constrain(theta);
  const double sigma = latent.sigma_zeta;
  const double e1 = latent.zeta_county[1];
  const double e2 = latent.zeta_county[2];
  const double expected = -e1 / (sigma * sigma) + e2 / (sigma * sigma);
  const std::vector<double> grad = model.grad_log_posterior(theta);
  CHECK(grad[free_empty1] == doctest::Approx(expected).epsilon(1e-10));
  (void)log_sigma_zeta;
}

TEST_CASE("poisson cell likelihood is maximized at f = t/n") {
  const Model model(synthetic_counts(1, 1), Hyperparams{});
  Cell cell;
  cell.population = 1000;
  cell.tests = 100;
  cell.cases = 10;
  double best_f = 0.0, best_ll = -kInf;
  for (double f = 0.05; f <= 0.2; f += 0.0005) {
    const double ll = model.cell_log_likelihood(f, 0.1, cell);
    if (ll > best_ll) {
      best_ll = ll;
      best_f = f;
    }
  }
  CHECK(best_f == doctest::Approx(0.1).epsilon(0.006));
}

TEST_CASE("poisson and binomial agree on likelihood differences in the rare-events regime") {
  ObservedCounts counts;
  counts.race_names = {"white"};
  counts.county_names = {"c0"};
  counts.cells = {{0, 0, 20000, 150, 30}};
  const Model poisson_model(counts, Hyperparams{});
  Hyperparams hp;
  hp.variant = CountModel::binomial;
  const Model binomial_model(counts, hp);
  const Cell& cell = counts.cells[0];

  const std::vector<std::pair<double, double>> points = {
      {0.0075, 0.2}, {0.0080, 0.2}, {0.0090, 0.2}, {0.0100, 0.2}};
  for (std::size_t i = 0; i + 1 < points.size(); ++i) {
    const double dp =
        poisson_model.cell_log_likelihood(points[i].first, points[i].second, cell) -
        poisson_model.cell_log_likelihood(points[i + 1].first, points[i + 1].second, cell);
    const double db =
        binomial_model.cell_log_likelihood(points[i].first, points[i].second, cell) -
        binomial_model.cell_log_likelihood(points[i + 1].first, points[i + 1].second, cell);
    CHECK(std::fabs(dp - db) <= 0.01 * std::fabs(dp));
  }
}

TEST_CASE("predict averages cell rates over draws") {
  const Model model(synthetic_counts(3, 13), Hyperparams{});
  Rng rng(6);
  std::vector<double> theta = random_point(model, rng, 0.3);

  PosteriorDraws single;
  single.chains = 1;
  single.iterations = 1;
  single.dimension = model.dimension();
  single.values = theta;
  single.log_densities = {0.0};
  single.divergent = {0};

  const auto rates = model.cell_rates(model.constrain(theta));
  const auto predicted = model.predict(single);
  REQUIRE(predicted.size() == rates.size());
  for (std::size_t i = 0; i < rates.size(); ++i) {
    CHECK(predicted[i].f == doctest::Approx(rates[i].f).epsilon(1e-12));
    CHECK(predicted[i].g == doctest::Approx(rates[i].g).epsilon(1e-12));
  }

  PosteriorDraws doubled = single;
  doubled.iterations = 2;
  doubled.values.insert(doubled.values.end(), theta.begin(), theta.end());
  doubled.log_densities.push_back(0.0);
  doubled.divergent.push_back(0);
  const auto predicted2 = model.predict(doubled);
  for (std::size_t i = 0; i < rates.size(); ++i) {
    CHECK(predicted2[i].f == doctest::Approx(predicted[i].f).epsilon(1e-14));
  }

  PosteriorDraws empty;
  empty.dimension = model.dimension();
  CHECK_THROWS_AS(model.predict(empty), std::invalid_argument);
}
