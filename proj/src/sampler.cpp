#include "threshtest/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <thread>

#include "threshtest/math.hpp"
#include "threshtest/rng.hpp"

namespace threshtest {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNan = std::numeric_limits<double>::quiet_NaN();
constexpr double kDivergenceEnergy = 1000.0;

bool all_finite(std::span<const double> v) {
  for (double x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

// Dual averaging state for the step size (Hoffman & Gelman 2014).
struct DualAveraging {
  double mu = 0.0;
  double log_eps = 0.0;
  double log_eps_bar = 0.0;
  double h_bar = 0.0;
  double gamma = 0.05;
  double t0 = 10.0;
  double kappa = 0.75;
  long count = 0;

  void restart(double eps) {
    mu = std::log(10.0 * eps);
    log_eps = std::log(eps);
    log_eps_bar = log_eps;
    h_bar = 0.0;
    count = 0;
  }
  void update(double target, double accept_prob) {
    ++count;
    const double t = static_cast<double>(count);
    h_bar = (1.0 - 1.0 / (t + t0)) * h_bar + (target - accept_prob) / (t + t0);
    log_eps = mu - std::sqrt(t) / gamma * h_bar;
    const double w = std::pow(t, -kappa);
    log_eps_bar = w * log_eps + (1.0 - w) * log_eps_bar;
  }
  double current() const {
    return std::clamp(std::exp(log_eps), 1e-7, 10.0);
  }
  double averaged() const {
    return std::clamp(std::exp(log_eps_bar), 1e-7, 10.0);
  }
};

// Streaming mean/variance (Welford) per coordinate.
struct VarianceAccumulator {
  std::vector<double> mean;
  std::vector<double> m2;
  long count = 0;

  explicit VarianceAccumulator(std::size_t dim) : mean(dim, 0.0), m2(dim, 0.0) {}
  void add(std::span<const double> x) {
    ++count;
    for (std::size_t i = 0; i < mean.size(); ++i) {
      const double d = x[i] - mean[i];
      mean[i] += d / static_cast<double>(count);
      m2[i] += d * (x[i] - mean[i]);
    }
  }
  // Regularized variances (shrunk slightly toward a small constant, as is
  // standard for warmup metric estimates).
  std::vector<double> regularized() const {
    std::vector<double> out(mean.size(), 1.0);
    if (count < 2) return out;
    const double n = static_cast<double>(count);
    for (std::size_t i = 0; i < mean.size(); ++i) {
      const double var = m2[i] / (n - 1.0);
      out[i] = (n / (n + 5.0)) * var + 1e-3 * (5.0 / (n + 5.0));
      if (!(out[i] > 0.0)) out[i] = 1.0;
    }
    return out;
  }
};

struct ChainResult {
  std::vector<double> values;
  std::vector<double> log_densities;
  std::vector<std::uint8_t> divergent;
  ChainInfo info;
  std::string error;  // non-empty if the chain failed
};

double hamiltonian(double log_density, std::span<const double> momentum,
                   std::span<const double> inverse_mass) {
  double kinetic = 0.0;
  for (std::size_t i = 0; i < momentum.size(); ++i) {
    kinetic += 0.5 * inverse_mass[i] * momentum[i] * momentum[i];
  }
  return -log_density + kinetic;
}

void run_one_chain(const TargetDensity& target, const SamplerConfig& config,
                   const std::vector<double>& init, std::size_t chain_index,
                   ChainResult& out) {
  const std::size_t dim = target.dimension;
  Rng rng(config.seed + chain_index);

  std::vector<double> position;
  if (!init.empty()) {
    position = init;
    if (!std::isfinite(target.log_density(position))) {
      out.error = "initial point has non-finite density";
      return;
    }
  } else {
    bool found = false;
    for (int attempt = 0; attempt < config.max_init_retries; ++attempt) {
      position.assign(dim, 0.0);
      for (std::size_t i = 0; i < dim; ++i) {
        position[i] = rng.uniform(-config.init_radius, config.init_radius);
      }
      if (std::isfinite(target.log_density(position))) {
        found = true;
        break;
      }
    }
    if (!found) {
      out.error = "no finite initial density after bounded retries";
      return;
    }
  }

  std::vector<double> inverse_mass(dim, 1.0);
  DualAveraging da;
  da.restart(config.initial_step_size);

  const int warmup = config.warmup_iterations;
  const int mass_window_begin = warmup / 2;
  const int mass_window_end = (warmup * 4) / 5;
  VarianceAccumulator mass_acc(dim);

  double current_lp = target.log_density(position);
  std::vector<double> momentum(dim);

  const int total = warmup + config.sampling_iterations;
  out.values.reserve(static_cast<std::size_t>(config.sampling_iterations) * dim);
  int warmup_divergences = 0;
  double accept_sum = 0.0;
  long accept_count = 0;

  for (int iter = 0; iter < total; ++iter) {
    const bool in_warmup = iter < warmup;
    const double eps = in_warmup ? da.current() : da.averaged();
    const int steps =
        1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(
                std::max(1, config.max_leapfrog_steps))));

    for (std::size_t i = 0; i < dim; ++i) {
      momentum[i] = rng.normal() / std::sqrt(inverse_mass[i]);
    }
    const double h0 = hamiltonian(current_lp, momentum, inverse_mass);

    LeapfrogState prop =
        leapfrog(target, position, momentum, eps, steps, inverse_mass);
    double prop_lp = -kInf;
    double accept_prob = 0.0;
    bool divergent = prop.divergent;
    if (!divergent) {
      prop_lp = target.log_density(prop.position);
      const double h1 = hamiltonian(prop_lp, prop.momentum, inverse_mass);
      const double energy_error = h1 - h0;
      if (!std::isfinite(energy_error) || energy_error > kDivergenceEnergy) {
        divergent = true;
      } else {
        accept_prob = std::min(1.0, std::exp(-energy_error));
        if (rng.uniform() < accept_prob) {
          position = std::move(prop.position);
          current_lp = prop_lp;
        }
      }
    }

    if (in_warmup) {
      if (divergent) ++warmup_divergences;
      da.update(config.target_acceptance, divergent ? 0.0 : accept_prob);
      if (iter >= mass_window_begin && iter < mass_window_end) {
        mass_acc.add(position);
      }
      if (iter + 1 == mass_window_end && mass_acc.count >= 10) {
        inverse_mass = mass_acc.regularized();
        da.restart(da.averaged());
      }
      if (iter + 1 == warmup && warmup_divergences == warmup && warmup > 0) {
        out.error = "sampler failed to adapt: every warmup iteration diverged";
        return;
      }
    } else {
      out.values.insert(out.values.end(), position.begin(), position.end());
      out.log_densities.push_back(current_lp);
      out.divergent.push_back(divergent ? 1 : 0);
      if (divergent) ++out.info.divergences;
      accept_sum += divergent ? 0.0 : accept_prob;
      ++accept_count;
    }
  }

  out.info.step_size = da.averaged();
  out.info.inverse_mass = inverse_mass;
  out.info.mean_acceptance =
      accept_count > 0 ? accept_sum / static_cast<double>(accept_count) : 0.0;
}

// Lazily evaluated mean autocovariance at a given lag across split
// sequences. seqs is a list of equal-length sequences.
double mean_autocovariance(const std::vector<std::vector<double>>& seqs,
                           std::size_t lag) {
  double total = 0.0;
  for (const auto& s : seqs) {
    const std::size_t n = s.size();
    double m = 0.0;
    for (double v : s) m += v;
    m /= static_cast<double>(n);
    double acc = 0.0;
    for (std::size_t t = 0; t + lag < n; ++t) {
      acc += (s[t] - m) * (s[t + lag] - m);
    }
    total += acc / static_cast<double>(n);
  }
  return total / static_cast<double>(seqs.size());
}

}  // namespace

LeapfrogState leapfrog(const TargetDensity& target,
                       std::span<const double> position,
                       std::span<const double> momentum, double step_size,
                       int steps, std::span<const double> inverse_mass) {
  LeapfrogState state;
  state.position.assign(position.begin(), position.end());
  state.momentum.assign(momentum.begin(), momentum.end());
  if (steps <= 0) return state;

  const std::size_t dim = state.position.size();
  std::vector<double> grad = target.gradient(state.position);
  if (!all_finite(grad)) {
    state.divergent = true;
    return state;
  }
  for (std::size_t i = 0; i < dim; ++i) {
    state.momentum[i] += 0.5 * step_size * grad[i];
  }
  for (int step = 0; step < steps; ++step) {
    for (std::size_t i = 0; i < dim; ++i) {
      state.position[i] += step_size * inverse_mass[i] * state.momentum[i];
    }
    if (!all_finite(state.position)) {
      state.divergent = true;
      return state;
    }
    grad = target.gradient(state.position);
    if (!all_finite(grad)) {
      state.divergent = true;
      return state;
    }
    const double half = step + 1 == steps ? 0.5 : 1.0;
    for (std::size_t i = 0; i < dim; ++i) {
      state.momentum[i] += half * step_size * grad[i];
    }
  }
  return state;
}

PosteriorDraws run_chains(const TargetDensity& target,
                          const SamplerConfig& config,
                          const std::vector<double>& init) {
  if (target.dimension == 0 || !target.log_density || !target.gradient) {
    throw std::invalid_argument("run_chains: target not fully specified");
  }
  if (config.chains < 1 || config.sampling_iterations < 1 ||
      config.warmup_iterations < 0) {
    throw std::invalid_argument("run_chains: invalid iteration counts");
  }
  if (!(config.target_acceptance > 0.0 && config.target_acceptance < 1.0)) {
    throw std::invalid_argument("run_chains: target_acceptance must lie in (0, 1)");
  }
  if (!init.empty() && init.size() != target.dimension) {
    throw std::invalid_argument("run_chains: init dimension mismatch");
  }

  const auto n_chains = static_cast<std::size_t>(config.chains);
  std::vector<ChainResult> results(n_chains);

  unsigned hw = std::thread::hardware_concurrency();
  if (hw == 0) hw = 1;
  std::size_t n_threads = config.threads > 0
                              ? static_cast<std::size_t>(config.threads)
                              : static_cast<std::size_t>(hw);
  n_threads = std::min(n_threads, n_chains);

  if (n_threads <= 1) {
    for (std::size_t c = 0; c < n_chains; ++c) {
      run_one_chain(target, config, init, c, results[c]);
    }
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < n_threads; ++t) {
      pool.emplace_back([&, t] {
        for (std::size_t c = t; c < n_chains; c += n_threads) {
          run_one_chain(target, config, init, c, results[c]);
        }
      });
    }
    for (auto& th : pool) th.join();
  }

  for (std::size_t c = 0; c < n_chains; ++c) {
    if (!results[c].error.empty()) {
      throw std::runtime_error("chain " + std::to_string(c) + ": " +
                               results[c].error);
    }
  }

  PosteriorDraws draws;
  draws.chains = n_chains;
  draws.iterations = static_cast<std::size_t>(config.sampling_iterations);
  draws.dimension = target.dimension;
  draws.values.reserve(n_chains * draws.iterations * draws.dimension);
  for (auto& r : results) {
    draws.values.insert(draws.values.end(), r.values.begin(), r.values.end());
    draws.log_densities.insert(draws.log_densities.end(),
                               r.log_densities.begin(), r.log_densities.end());
    draws.divergent.insert(draws.divergent.end(), r.divergent.begin(),
                           r.divergent.end());
    draws.chain_info.push_back(std::move(r.info));
  }
  return draws;
}

double Diagnostics::max_rhat() const {
  double worst = -kInf;
  for (const auto& p : parameters) {
    if (std::isnan(p.rhat)) return kNan;
    worst = std::max(worst, p.rhat);
  }
  return worst;
}

double Diagnostics::min_ess() const {
  double worst = kInf;
  for (const auto& p : parameters) {
    if (std::isnan(p.ess)) return kNan;
    worst = std::min(worst, p.ess);
  }
  return worst;
}

Diagnostics diagnostics(const PosteriorDraws& draws) {
  if (draws.chains < 2) {
    throw std::invalid_argument(
        "diagnostics: need at least 2 chains (4 post-split segments)");
  }
  const std::size_t half = draws.iterations / 2;
  if (half < 2) {
    throw std::invalid_argument("diagnostics: too few iterations to split");
  }

  Diagnostics out;
  out.parameters.resize(draws.dimension);
  for (std::uint8_t d : draws.divergent) out.divergences += d;

  std::vector<std::vector<double>> seqs(draws.chains * 2,
                                        std::vector<double>(half));
  for (std::size_t p = 0; p < draws.dimension; ++p) {
    double lo = kInf, hi = -kInf;
    for (std::size_t c = 0; c < draws.chains; ++c) {
      for (std::size_t i = 0; i < half; ++i) {
        seqs[2 * c][i] = draws.at(c, i, p);
        seqs[2 * c + 1][i] = draws.at(c, half + i, p);
      }
      for (std::size_t i = 0; i < draws.iterations; ++i) {
        lo = std::min(lo, draws.at(c, i, p));
        hi = std::max(hi, draws.at(c, i, p));
      }
    }
    if (lo == hi) {  // constant parameter: R-hat and ESS undefined
      out.parameters[p] = {kNan, kNan};
      continue;
    }
    const std::size_t m = seqs.size();
    const double n = static_cast<double>(half);

    std::vector<double> seq_means(m), seq_vars(m);
    for (std::size_t s = 0; s < m; ++s) {
      seq_means[s] = mean(seqs[s]);
      seq_vars[s] = variance(seqs[s]);
    }
    const double within = mean(seq_vars);
    const double between = n * variance(seq_means);
    if (!(within > 0.0)) {
      out.parameters[p] = {kNan, kNan};
      continue;
    }
    const double var_plus = (n - 1.0) / n * within + between / n;
    out.parameters[p].rhat = std::sqrt(var_plus / within);

    // ESS: Geyer initial-positive-sequence truncation on paired
    // autocorrelation sums, evaluated lazily until the first negative pair.
    double tau = 0.0;
    bool truncated = false;
    for (std::size_t k = 0; 2 * k + 1 < half; ++k) {
      const double rho_even =
          1.0 - (within - mean_autocovariance(seqs, 2 * k)) / var_plus;
      const double rho_odd =
          1.0 - (within - mean_autocovariance(seqs, 2 * k + 1)) / var_plus;
      const double pair = rho_even + rho_odd;
      if (pair <= 0.0) {
        truncated = true;
        break;
      }
      tau += 2.0 * pair;
    }
    tau -= 1.0;  // the k = 0 pair double-counts rho_0 = 1
    if (!truncated && tau <= 0.0) {
      out.parameters[p].ess = kNan;
      continue;
    }
    const double total = static_cast<double>(m) * n;
    out.parameters[p].ess = total / std::max(tau, 1.0 / total);
  }
  return out;
}

}  // namespace threshtest
