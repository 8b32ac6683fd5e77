#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "threshtest/commands.hpp"
#include "threshtest/csv.hpp"

// threshtest: infer race- and county-specific disease testing thresholds
// from aggregate test/case/population counts.
//
// Every config key has a flag of the same name; flags override the config
// file. See README.md for the key reference and file schemas.

namespace {

struct Override {
  std::string key;
  std::string value;
  bool present = false;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bayesian threshold test for disease testing disparities"};
  app.require_subcommand(1);

  std::string config_path;
  app.add_option("--config", config_path, "configuration file (key=value lines)")
      ->check(CLI::ExistingFile);

  // One override slot per config key; only keys the user passed are applied.
  std::vector<Override> overrides;
  const auto add_key = [&](const std::string& key, const std::string& help) {
    overrides.push_back({key, "", false});
    auto& slot = overrides.back();
    app.add_option_function<std::string>(
           "--" + key,
           [&slot](const std::string& v) {
             slot.value = v;
             slot.present = true;
           },
           help)
        ->expected(1);
  };
  add_key("tests_csv", "raw tests file");
  add_key("cases_csv", "raw cases file");
  add_key("census_csv", "census populations file");
  add_key("counts_csv", "pre-aggregated counts file");
  add_key("scenario", "scenario file for simulate/recover");
  add_key("draws_csv", "draws file for report/ppc");
  add_key("method", "data processing method: original | raw | subtract");
  add_key("min_population", "county filter: minimum Black and Hispanic population");
  add_key("variant", "count model: poisson | binomial");
  add_key("county_delta_effects", "enable county-level signal-separation effects");
  add_key("prior_phi_loc", "prior prevalence location (probability)");
  add_key("prior_phi_scale", "prior prevalence scale (logit sd)");
  add_key("prior_zeta_loc", "prior threshold location (probability)");
  add_key("prior_zeta_scale", "prior threshold scale (logit sd)");
  add_key("prior_log_delta_loc", "prior log signal-separation mean");
  add_key("prior_log_delta_scale", "prior log signal-separation sd");
  add_key("prior_sigma_phi_scale", "half-normal scale for county prevalence effects");
  add_key("prior_sigma_zeta_scale", "half-normal scale for county threshold effects");
  add_key("prior_sigma_delta_scale", "half-normal scale for county delta effects");
  add_key("chains", "number of chains");
  add_key("warmup", "warmup iterations per chain");
  add_key("iters", "sampling iterations per chain");
  add_key("max_leapfrog_steps", "trajectory length upper bound");
  add_key("target_accept", "dual-averaging acceptance target");
  add_key("step_size", "initial leapfrog step size");
  add_key("seed", "random seed");
  add_key("threads", "worker threads (0 = hardware)");
  add_key("rhat_limit", "convergence gate on split R-hat");
  add_key("grid_points", "risk-density grid resolution");
  add_key("curve_max_draws", "draws used for density curves");
  add_key("robustness_methods", "comma list of methods for the grid");
  add_key("robustness_variants", "comma list of variants for the grid");
  add_key("out", "output directory");

  for (const char* name : {"fit", "simulate", "recover", "ppc", "report",
                           "demo", "robustness"}) {
    app.add_subcommand(name)->ignore_case();
  }

  CLI11_PARSE(app, argc, argv);

  threshtest::RunConfig config;
  try {
    if (!config_path.empty()) {
      config = threshtest::read_config(config_path);
    }
    for (const auto& o : overrides) {
      if (o.present) config.set(o.key, o.value);
    }
  } catch (const threshtest::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return threshtest::kExitConfig;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  return threshtest::run_command(command, config);
}
