#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

// Self-contained Hamiltonian Monte Carlo: leapfrog integration, dual
// averaging step-size adaptation (Hoffman & Gelman 2014 schedule), diagonal
// mass-matrix estimation, multi-chain execution and split-R-hat/ESS
// convergence diagnostics.
//
// Trajectories have a jittered length: each iteration integrates a number
// of leapfrog steps drawn uniformly from [1, max_leapfrog_steps].
//
// Warmup schedule (fractions of warmup_iterations):
//   [0, 0.5)   identity inverse mass, dual averaging round 1
//   [0.5, 0.8) positions recorded for the mass estimate (adaptation continues)
//   [0.8, 1)   inverse mass frozen to the regularized variances of the
//              recorded window; dual averaging restarted to re-tune the step
//              size under the new metric
// Sampling runs with the frozen mass matrix and the averaged step size.

namespace threshtest {

struct TargetDensity {
  std::size_t dimension = 0;
  // Log density up to a constant; may return -inf outside the support.
  std::function<double(std::span<const double>)> log_density;
  // Gradient of log_density; entries may be non-finite where the density
  // is not finite (the sampler treats that as a divergence).
  std::function<std::vector<double>(std::span<const double>)> gradient;
};

struct SamplerConfig {
  int chains = 4;
  int warmup_iterations = 1000;
  int sampling_iterations = 1000;
  int max_leapfrog_steps = 32;
  double target_acceptance = 0.8;
  std::uint64_t seed = 1;
  double initial_step_size = 0.1;
  double init_radius = 2.0;  // random init: uniform in [-r, r] per coordinate
  int max_init_retries = 100;
  int threads = 0;  // 0 = one thread per chain, capped by hardware
};

struct ChainInfo {
  double step_size = 0.0;
  std::vector<double> inverse_mass;
  int divergences = 0;
  double mean_acceptance = 0.0;
};

struct PosteriorDraws {
  std::size_t chains = 0;
  std::size_t iterations = 0;  // sampling iterations per chain
  std::size_t dimension = 0;
  std::vector<double> values;          // [chain][iteration][dimension]
  std::vector<double> log_densities;   // [chain][iteration]
  std::vector<std::uint8_t> divergent; // [chain][iteration]
  std::vector<ChainInfo> chain_info;

  double at(std::size_t chain, std::size_t iter, std::size_t dim) const {
    return values[(chain * iterations + iter) * dimension + dim];
  }
  std::span<const double> draw(std::size_t chain, std::size_t iter) const {
    return {values.data() + (chain * iterations + iter) * dimension, dimension};
  }
  std::size_t total_draws() const { return chains * iterations; }
  std::span<const double> flat_draw(std::size_t index) const {
    return {values.data() + index * dimension, dimension};
  }
};

struct LeapfrogState {
  std::vector<double> position;
  std::vector<double> momentum;
  bool divergent = false;  // non-finite value or gradient encountered
};

// Kick-drift-kick integration of Hamilton's equations for the kinetic
// energy 0.5 * sum_i inverse_mass[i] * p_i^2. Volume preserving and time
// reversible; steps == 0 returns the inputs unchanged.
LeapfrogState leapfrog(const TargetDensity& target,
                       std::span<const double> position,
                       std::span<const double> momentum, double step_size,
                       int steps, std::span<const double> inverse_mass);

// Runs config.chains independent chains (in parallel when threads allow);
// chain c uses the Rng seeded with config.seed + c, so results are
// deterministic for a fixed seed regardless of scheduling. An empty init
// requests random initialization (bounded retries to find finite density).
PosteriorDraws run_chains(const TargetDensity& target,
                          const SamplerConfig& config,
                          const std::vector<double>& init = {});

struct ParameterDiagnostics {
  double rhat = 0.0;  // NaN when undefined (degenerate variance)
  double ess = 0.0;   // NaN when undefined
};

struct Diagnostics {
  std::vector<ParameterDiagnostics> parameters;
  long divergences = 0;

  double max_rhat() const;
  double min_ess() const;
};

// Split-chain R-hat and effective sample size (autocorrelation sums
// truncated at the first negative paired sum). Requires at least two
// chains, i.e. four post-split segments.
Diagnostics diagnostics(const PosteriorDraws& draws);

}  // namespace threshtest
