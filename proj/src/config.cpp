#include "threshtest/config.hpp"

#include <fstream>

#include "threshtest/csv.hpp"

namespace threshtest {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  const auto e = s.find_last_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, e - b + 1);
}

std::int64_t to_int(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const long long v = std::stoll(value, &used);
    if (used != value.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': cannot parse integer '" + value + "'");
  }
}

double to_double(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': cannot parse number '" + value + "'");
  }
}

bool to_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw ConfigError("config key '" + key + "': cannot parse boolean '" + value + "'");
}

}  // namespace

ProcessingMethod RunConfig::processing_method() const {
  return parse_method(method);
}

Hyperparams RunConfig::hyperparams() const {
  Hyperparams hp;
  hp.phi_loc = prior_phi_loc;
  hp.phi_scale = prior_phi_scale;
  hp.zeta_loc = prior_zeta_loc;
  hp.zeta_scale = prior_zeta_scale;
  hp.log_delta_loc = prior_log_delta_loc;
  hp.log_delta_scale = prior_log_delta_scale;
  hp.sigma_phi_scale = prior_sigma_phi_scale;
  hp.sigma_zeta_scale = prior_sigma_zeta_scale;
  hp.sigma_delta_scale = prior_sigma_delta_scale;
  hp.county_delta_effects = county_delta_effects;
  if (variant == "poisson") {
    hp.variant = CountModel::poisson;
  } else if (variant == "binomial") {
    hp.variant = CountModel::binomial;
  } else {
    throw ConfigError("unknown model variant '" + variant +
                      "' (expected poisson | binomial)");
  }
  return hp;
}

SamplerConfig RunConfig::sampler_config() const {
  SamplerConfig sc;
  sc.chains = chains;
  sc.warmup_iterations = warmup;
  sc.sampling_iterations = iters;
  sc.max_leapfrog_steps = max_leapfrog_steps;
  sc.target_acceptance = target_accept;
  sc.initial_step_size = step_size;
  sc.seed = seed;
  sc.threads = threads;
  return sc;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  if (key == "tests_csv") tests_csv = value;
  else if (key == "cases_csv") cases_csv = value;
  else if (key == "census_csv") census_csv = value;
  else if (key == "counts_csv") counts_csv = value;
  else if (key == "scenario") scenario = value;
  else if (key == "draws_csv") draws_csv = value;
  else if (key == "method") method = value;
  else if (key == "min_population") min_population = to_int(key, value);
  else if (key == "variant") variant = value;
  else if (key == "county_delta_effects") county_delta_effects = to_bool(key, value);
  else if (key == "prior_phi_loc") prior_phi_loc = to_double(key, value);
  else if (key == "prior_phi_scale") prior_phi_scale = to_double(key, value);
  else if (key == "prior_zeta_loc") prior_zeta_loc = to_double(key, value);
  else if (key == "prior_zeta_scale") prior_zeta_scale = to_double(key, value);
  else if (key == "prior_log_delta_loc") prior_log_delta_loc = to_double(key, value);
  else if (key == "prior_log_delta_scale") prior_log_delta_scale = to_double(key, value);
  else if (key == "prior_sigma_phi_scale") prior_sigma_phi_scale = to_double(key, value);
  else if (key == "prior_sigma_zeta_scale") prior_sigma_zeta_scale = to_double(key, value);
  else if (key == "prior_sigma_delta_scale") prior_sigma_delta_scale = to_double(key, value);
  else if (key == "chains") chains = static_cast<int>(to_int(key, value));
  else if (key == "warmup") warmup = static_cast<int>(to_int(key, value));
  else if (key == "iters") iters = static_cast<int>(to_int(key, value));
  else if (key == "max_leapfrog_steps") max_leapfrog_steps = static_cast<int>(to_int(key, value));
  else if (key == "target_accept") target_accept = to_double(key, value);
  else if (key == "step_size") step_size = to_double(key, value);
  else if (key == "seed") seed = static_cast<std::uint64_t>(to_int(key, value));
  else if (key == "threads") threads = static_cast<int>(to_int(key, value));
  else if (key == "rhat_limit") rhat_limit = to_double(key, value);
  else if (key == "grid_points") grid_points = static_cast<int>(to_int(key, value));
  else if (key == "curve_max_draws") curve_max_draws = static_cast<int>(to_int(key, value));
  else if (key == "robustness_methods") robustness_methods = value;
  else if (key == "robustness_variants") robustness_variants = value;
  else if (key == "out") out = value;
  else throw ConfigError("unknown config key '" + key + "'");
}

std::map<std::string, std::string> RunConfig::to_map() const {
  std::map<std::string, std::string> m;
  m["tests_csv"] = tests_csv;
  m["cases_csv"] = cases_csv;
  m["census_csv"] = census_csv;
  m["counts_csv"] = counts_csv;
  m["scenario"] = scenario;
  m["draws_csv"] = draws_csv;
  m["method"] = method;
  m["min_population"] = std::to_string(min_population);
  m["variant"] = variant;
  m["county_delta_effects"] = county_delta_effects ? "true" : "false";
  m["prior_phi_loc"] = format_double(prior_phi_loc, 17);
  m["prior_phi_scale"] = format_double(prior_phi_scale, 17);
  m["prior_zeta_loc"] = format_double(prior_zeta_loc, 17);
  m["prior_zeta_scale"] = format_double(prior_zeta_scale, 17);
  m["prior_log_delta_loc"] = format_double(prior_log_delta_loc, 17);
  m["prior_log_delta_scale"] = format_double(prior_log_delta_scale, 17);
  m["prior_sigma_phi_scale"] = format_double(prior_sigma_phi_scale, 17);
  m["prior_sigma_zeta_scale"] = format_double(prior_sigma_zeta_scale, 17);
  m["prior_sigma_delta_scale"] = format_double(prior_sigma_delta_scale, 17);
  m["chains"] = std::to_string(chains);
  m["warmup"] = std::to_string(warmup);
  m["iters"] = std::to_string(iters);
  m["max_leapfrog_steps"] = std::to_string(max_leapfrog_steps);
  m["target_accept"] = format_double(target_accept, 17);
  m["step_size"] = format_double(step_size, 17);
  m["seed"] = std::to_string(seed);
  m["threads"] = std::to_string(threads);
  m["rhat_limit"] = format_double(rhat_limit, 17);
  m["grid_points"] = std::to_string(grid_points);
  m["curve_max_draws"] = std::to_string(curve_max_draws);
  m["robustness_methods"] = robustness_methods;
  m["robustness_variants"] = robustness_variants;
  m["out"] = out;
  return m;
}

RunConfig read_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
  RunConfig config;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    const auto comment = line.find('#');
    if (comment != std::string::npos) line = line.substr(0, comment);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(path.string() + ":" + std::to_string(line_number) +
                        ": expected key=value");
    }
    try {
      config.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError(path.string() + ":" + std::to_string(line_number) + ": " +
                        e.what());
    }
  }
  return config;
}

}  // namespace threshtest
