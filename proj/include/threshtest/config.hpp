#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include "threshtest/ingest.hpp"
#include "threshtest/model.hpp"
#include "threshtest/sampler.hpp"

// Run configuration: a flat key=value text file ('#' starts a comment),
// every key overridable by the command-line flag of the same name. The
// full key set is listed in the README; unknown keys are rejected so typos
// fail loudly.

namespace threshtest {

struct RunConfig {
  // data inputs
  std::string tests_csv, cases_csv, census_csv;  // raw ingest triple
  std::string counts_csv;                        // pre-aggregated alternative
  std::string scenario;    // scenario file for simulate/recover ("" = built-in)
  std::string draws_csv;   // existing draws for report/ppc
  std::string method = "original";
  std::int64_t min_population = 500;

  // model
  std::string variant = "poisson";
  bool county_delta_effects = false;
  double prior_phi_loc = 0.01;
  double prior_phi_scale = 1.5;
  double prior_zeta_loc = 0.05;
  double prior_zeta_scale = 1.5;
  double prior_log_delta_loc = 0.0;
  double prior_log_delta_scale = 0.5;
  double prior_sigma_phi_scale = 0.5;
  double prior_sigma_zeta_scale = 0.5;
  double prior_sigma_delta_scale = 0.5;

  // sampler
  int chains = 4;
  int warmup = 1000;
  int iters = 1000;
  int max_leapfrog_steps = 32;
  double target_accept = 0.8;
  double step_size = 0.1;
  std::uint64_t seed = 1;
  int threads = 0;
  double rhat_limit = 1.05;

  // report
  int grid_points = 2001;
  int curve_max_draws = 400;

  // robustness grid
  std::string robustness_methods = "original,raw,subtract";
  std::string robustness_variants = "poisson,binomial";

  std::string out = "out";

  ProcessingMethod processing_method() const;
  Hyperparams hyperparams() const;
  SamplerConfig sampler_config() const;

  // Applies one key=value assignment; throws ConfigError on unknown keys or
  // unparseable values.
  void set(const std::string& key, const std::string& value);
  // Serialization used for the manifest echo (sorted by key).
  std::map<std::string, std::string> to_map() const;
};

RunConfig read_config(const std::filesystem::path& path);

}  // namespace threshtest
