#include "threshtest/commands.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "threshtest/csv.hpp"
#include "threshtest/ingest.hpp"
#include "threshtest/math.hpp"
#include "threshtest/synth.hpp"

namespace threshtest {

namespace {

using Clock = std::chrono::steady_clock;

void write_manifest(const RunConfig& config, const std::string& command,
                    double elapsed_seconds) {
  const std::filesystem::path dir(config.out);
  std::filesystem::create_directories(dir);
  std::ofstream out(dir / "manifest.txt");
  if (!out) throw DataError("cannot write manifest under '" + config.out + "'");
  out << "command=" << command << '\n';
  out << "version=" << kVersion << '\n';
  out << "elapsed_seconds=" << format_double(elapsed_seconds, 6) << '\n';
  for (const auto& [key, value] : config.to_map()) {
    out << key << '=' << value << '\n';
  }
}

void write_diagnostics_csv(const Diagnostics& diag,
                           const std::vector<std::string>& names,
                           const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << "parameter,rhat,ess\n";
  for (std::size_t i = 0; i < names.size(); ++i) {
    out << names[i] << ',' << format_double(diag.parameters[i].rhat) << ','
        << format_double(diag.parameters[i].ess) << '\n';
  }
}

TrueScenario configured_scenario(const RunConfig& config) {
  if (config.scenario.empty()) {
    return default_recovery_scenario(config.seed);
  }
  TrueScenario scenario = read_scenario(config.scenario);
  scenario.seed = config.seed;  // the run seed wins for reproducibility
  return scenario;
}

void print_summary(const DisparityReport& report) {
  std::cout << "test-weighted mean thresholds:\n";
  for (const auto& t : report.weighted_thresholds) {
    std::cout << "  " << t.race << ": " << format_double(t.weighted_threshold.mean, 4)
              << " (" << format_double(t.weighted_threshold.lower, 4) << ", "
              << format_double(t.weighted_threshold.upper, 4) << ")\n";
  }
  std::cout << "threshold ratios vs white:\n";
  for (const auto& r : report.ratios) {
    std::cout << "  " << r.race << ": " << format_double(r.ratio.mean, 4) << " ("
              << format_double(r.ratio.lower, 4) << ", "
              << format_double(r.ratio.upper, 4) << ")\n";
  }
  std::cout << "max R-hat " << format_double(report.max_rhat, 4) << ", min ESS "
            << format_double(report.min_ess, 4) << ", divergences "
            << report.divergences << "\n";
}

// Convergence gate: fails on NaN as well as on exceedance.
void check_convergence(const DisparityReport& report, double limit) {
  if (!(report.max_rhat <= limit)) {
    throw ConvergenceError("convergence gate failed: max R-hat " +
                           format_double(report.max_rhat, 6) + " exceeds " +
                           format_double(limit, 6) +
                           " (diagnostics and draws were written)");
  }
}

struct CellCoverage {
  std::string race, county;
  double truth = 0, mean = 0, lower = 0, upper = 0;
  bool covered = false;
};

}  // namespace

void write_draws_csv(const PosteriorDraws& draws,
                     const std::vector<std::string>& parameter_names,
                     const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << "chain,iteration,divergent,log_density";
  for (const auto& name : parameter_names) out << ',' << name;
  out << '\n';
  for (std::size_t c = 0; c < draws.chains; ++c) {
    for (std::size_t i = 0; i < draws.iterations; ++i) {
      out << c << ',' << i << ','
          << static_cast<int>(draws.divergent[c * draws.iterations + i]) << ','
          << format_double(draws.log_densities[c * draws.iterations + i], 17);
      for (std::size_t d = 0; d < draws.dimension; ++d) {
        out << ',' << format_double(draws.at(c, i, d), 17);
      }
      out << '\n';
    }
  }
}

PosteriorDraws read_draws_csv(const std::filesystem::path& path,
                              const std::vector<std::string>& expected_names) {
  const CsvTable table = read_csv(path);
  if (table.header.size() != expected_names.size() + 4) {
    throw DataError(path.string() + ": draws file has " +
                    std::to_string(table.header.size()) +
                    " columns but the model expects " +
                    std::to_string(expected_names.size() + 4));
  }
  for (std::size_t i = 0; i < expected_names.size(); ++i) {
    if (table.header[i + 4] != expected_names[i]) {
      throw DataError(path.string() + ": parameter column '" +
                      table.header[i + 4] + "' does not match model parameter '" +
                      expected_names[i] + "'");
    }
  }
  PosteriorDraws draws;
  draws.dimension = expected_names.size();
  std::size_t max_chain = 0;
  for (std::size_t row = 0; row < table.rows.size(); ++row) {
    max_chain = std::max(max_chain, static_cast<std::size_t>(parse_int(table, row, 0)));
  }
  draws.chains = max_chain + 1;
  if (table.rows.size() % draws.chains != 0) {
    throw DataError(path.string() + ": ragged chains in draws file");
  }
  draws.iterations = table.rows.size() / draws.chains;
  draws.values.assign(draws.chains * draws.iterations * draws.dimension, 0.0);
  draws.log_densities.assign(draws.chains * draws.iterations, 0.0);
  draws.divergent.assign(draws.chains * draws.iterations, 0);
  for (std::size_t row = 0; row < table.rows.size(); ++row) {
    const auto chain = static_cast<std::size_t>(parse_int(table, row, 0));
    const auto iter = static_cast<std::size_t>(parse_int(table, row, 1));
    if (iter >= draws.iterations) {
      throw DataError(path.string() + ": iteration index out of range");
    }
    const std::size_t flat = chain * draws.iterations + iter;
    draws.divergent[flat] = parse_int(table, row, 2) != 0 ? 1 : 0;
    draws.log_densities[flat] = parse_double(table, row, 3);
    for (std::size_t d = 0; d < draws.dimension; ++d) {
      draws.values[flat * draws.dimension + d] = parse_double(table, row, d + 4);
    }
  }
  draws.chain_info.resize(draws.chains);
  return draws;
}

ObservedCounts load_input_counts(const RunConfig& config) {
  if (!config.counts_csv.empty()) {
    return load_counts_csv(config.counts_csv);
  }
  if (config.tests_csv.empty() || config.cases_csv.empty() ||
      config.census_csv.empty()) {
    throw ConfigError(
        "no input data configured: set counts_csv or the tests_csv/"
        "cases_csv/census_csv triple");
  }
  LoadResult loaded = load(config.tests_csv, config.cases_csv, config.census_csv,
                           config.processing_method(), config.min_population);
  for (const auto& warning : loaded.warnings) {
    std::cerr << "warning: " << warning << '\n';
  }
  std::cerr << "retained " << loaded.filter.counties_kept << " of "
            << loaded.filter.counties_in << " counties covering "
            << format_double(100.0 * loaded.filter.black_share, 3) << "% of the Black and "
            << format_double(100.0 * loaded.filter.hispanic_share, 3)
            << "% of the Hispanic population\n";
  return loaded.counts;
}

FitResult fit_pipeline(const Model& model, const RunConfig& config) {
  FitResult result;
  result.draws = run_chains(model.target(), config.sampler_config());
  result.diag = diagnostics(result.draws);
  result.report = build_report(model, result.draws, config.grid_points,
                               config.curve_max_draws);
  return result;
}

void cmd_fit(const RunConfig& config) {
  const auto start = Clock::now();
  const ObservedCounts counts = load_input_counts(config);
  const Model model(counts, config.hyperparams());
  const FitResult fit = fit_pipeline(model, config);

  const std::filesystem::path dir(config.out);
  std::filesystem::create_directories(dir);
  write_counts_csv(counts, dir / "counts_used.csv");
  write_draws_csv(fit.draws, model.parameter_names(), dir / "draws.csv");
  write_diagnostics_csv(fit.diag, model.parameter_names(), dir / "diagnostics.csv");
  write_report_files(fit.report, dir);
  write_manifest(config, "fit",
                 std::chrono::duration<double>(Clock::now() - start).count());
  print_summary(fit.report);
  check_convergence(fit.report, config.rhat_limit);
}

void cmd_simulate(const RunConfig& config) {
  const auto start = Clock::now();
  const TrueScenario scenario = configured_scenario(config);
  const ObservedCounts counts = simulate(scenario);
  const std::filesystem::path dir(config.out);
  std::filesystem::create_directories(dir);
  write_counts_csv(counts, dir / "counts.csv");
  write_scenario(scenario, dir / "scenario.txt");
  write_manifest(config, "simulate",
                 std::chrono::duration<double>(Clock::now() - start).count());
  std::cout << "simulated " << counts.cells.size() << " cells into "
            << (dir / "counts.csv").string() << "\n";
}

void cmd_recover(const RunConfig& config) {
  const auto start = Clock::now();
  const TrueScenario scenario = configured_scenario(config);
  const ObservedCounts counts = simulate(scenario);
  const Model model(counts, config.hyperparams());
  const FitResult fit = fit_pipeline(model, config);

  const std::filesystem::path dir(config.out);
  std::filesystem::create_directories(dir);
  write_counts_csv(counts, dir / "counts.csv");
  write_scenario(scenario, dir / "scenario.txt");
  write_draws_csv(fit.draws, model.parameter_names(), dir / "draws.csv");
  write_diagnostics_csv(fit.diag, model.parameter_names(), dir / "diagnostics.csv");
  write_report_files(fit.report, dir);

  // Per-cell threshold coverage: truth against the central 95% interval.
  const std::size_t races = counts.race_count();
  const std::size_t counties = counts.county_count();
  std::vector<std::vector<double>> z_draws(races * counties);
  for (std::size_t i = 0; i < fit.draws.total_draws(); ++i) {
    const LatentParams latent = model.constrain(fit.draws.flat_draw(i));
    for (std::size_t r = 0; r < races; ++r) {
      for (std::size_t d = 0; d < counties; ++d) {
        z_draws[r * counties + d].push_back(
            logistic(latent.zeta_race[r] + latent.zeta_county[d]));
      }
    }
  }
  std::vector<CellCoverage> coverage;
  std::size_t covered = 0;
  for (const Cell& cell : counts.cells) {
    const ScenarioCell* truth = scenario.find(cell.race, cell.county);
    if (!truth) continue;
    CellCoverage cc;
    cc.race = counts.race_names[cell.race];
    cc.county = counts.county_names[cell.county];
    cc.truth = truth->threshold;
    const auto& zs = z_draws[cell.race * counties + cell.county];
    cc.mean = mean(zs);
    cc.lower = quantile(zs, 0.025);
    cc.upper = quantile(zs, 0.975);
    cc.covered = cc.truth >= cc.lower && cc.truth <= cc.upper;
    if (cc.covered) ++covered;
    coverage.push_back(cc);
  }

  // True test-weighted thresholds and ratios under the observed weights.
  const auto weights = counts.county_test_totals();
  double weight_sum = 0.0;
  for (auto w : weights) weight_sum += static_cast<double>(w);
  std::vector<double> true_weighted(races, 0.0);
  for (const Cell& cell : counts.cells) {
    const ScenarioCell* truth = scenario.find(cell.race, cell.county);
    if (truth) {
      true_weighted[cell.race] +=
          static_cast<double>(weights[cell.county]) * truth->threshold;
    }
  }
  for (double& v : true_weighted) v /= weight_sum;

  {
    std::ofstream out(dir / "recovery.csv");
    if (!out) throw DataError("cannot write recovery.csv");
    out << "race,county,true_threshold,posterior_mean,lower95,upper95,covered\n";
    for (const auto& cc : coverage) {
      out << cc.race << ',' << cc.county << ',' << format_double(cc.truth) << ','
          << format_double(cc.mean) << ',' << format_double(cc.lower) << ','
          << format_double(cc.upper) << ',' << (cc.covered ? 1 : 0) << '\n';
    }
  }

  nlohmann::json j;
  j["coverage_rate"] =
      coverage.empty() ? 0.0
                       : static_cast<double>(covered) /
                             static_cast<double>(coverage.size());
  for (std::size_t r = 0; r < races; ++r) {
    const auto& summary = fit.report.weighted_thresholds[r];
    j["weighted_thresholds"][counts.race_names[r]] = {
        {"true", true_weighted[r]},
        {"posterior_mean", summary.weighted_threshold.mean},
        {"lower95", summary.weighted_threshold.lower},
        {"upper95", summary.weighted_threshold.upper},
        {"relative_error",
         std::fabs(summary.weighted_threshold.mean - true_weighted[r]) /
             true_weighted[r]}};
  }
  const auto white_it =
      std::find(counts.race_names.begin(), counts.race_names.end(), "white");
  if (white_it != counts.race_names.end()) {
    const std::size_t white =
        static_cast<std::size_t>(white_it - counts.race_names.begin());
    for (const auto& ratio : fit.report.ratios) {
      const auto race_it = std::find(counts.race_names.begin(),
                                     counts.race_names.end(), ratio.race);
      const std::size_t r =
          static_cast<std::size_t>(race_it - counts.race_names.begin());
      const double true_ratio = true_weighted[r] / true_weighted[white];
      j["ratios"][ratio.race] = {
          {"true", true_ratio},
          {"posterior_mean", ratio.ratio.mean},
          {"lower95", ratio.ratio.lower},
          {"upper95", ratio.ratio.upper},
          {"covered",
           true_ratio >= ratio.ratio.lower && true_ratio <= ratio.ratio.upper}};
    }
  }
  {
    std::ofstream out(dir / "recovery_summary.json");
    if (!out) throw DataError("cannot write recovery_summary.json");
    out << j.dump(2) << '\n';
  }
  write_manifest(config, "recover",
                 std::chrono::duration<double>(Clock::now() - start).count());
  std::cout << "interval coverage over thresholds: "
            << format_double(100.0 * j["coverage_rate"].get<double>(), 4)
            << "%\n";
  print_summary(fit.report);
  check_convergence(fit.report, config.rhat_limit);
}

void cmd_demo(const RunConfig& config) {
  const auto start = Clock::now();
  const DemoReport masked = inframarginality_demo(default_demo_scenario());
  const DemoReport reversed = inframarginality_demo(reversal_demo_scenario());
  std::cout << "--- equal thresholds, unequal positivity ---\n"
            << masked.to_text()
            << "--- higher threshold, higher positivity (reverse direction) ---\n"
            << reversed.to_text();
  const std::filesystem::path dir(config.out);
  std::filesystem::create_directories(dir);
  nlohmann::json j;
  j["equal_thresholds"] = nlohmann::json::parse(masked.to_json());
  j["reverse_direction"] = nlohmann::json::parse(reversed.to_json());
  std::ofstream out(dir / "demo.json");
  if (!out) throw DataError("cannot write demo.json");
  out << j.dump(2) << '\n';
  write_manifest(config, "demo",
                 std::chrono::duration<double>(Clock::now() - start).count());
}

namespace {

// Shared by cmd_report / cmd_ppc: rebuild the model and reload draws.
std::pair<Model, PosteriorDraws> reload(const RunConfig& config) {
  if (config.draws_csv.empty()) {
    throw ConfigError("draws_csv must point at a previous fit's draws file");
  }
  const ObservedCounts counts = load_input_counts(config);
  Model model(counts, config.hyperparams());
  PosteriorDraws draws = read_draws_csv(config.draws_csv, model.parameter_names());
  return {std::move(model), std::move(draws)};
}

}  // namespace

void cmd_report(const RunConfig& config) {
  const auto start = Clock::now();
  const auto [model, draws] = reload(config);
  const DisparityReport report =
      build_report(model, draws, config.grid_points, config.curve_max_draws);
  write_report_files(report, config.out);
  write_manifest(config, "report",
                 std::chrono::duration<double>(Clock::now() - start).count());
  print_summary(report);
}

void cmd_ppc(const RunConfig& config) {
  const auto start = Clock::now();
  const auto [model, draws] = reload(config);
  const auto table = ppc(model, draws);
  const std::filesystem::path dir(config.out);
  std::filesystem::create_directories(dir);
  std::ofstream out(dir / "ppc.csv");
  if (!out) throw DataError("cannot write ppc.csv");
  out << "race,county,observed_tests_per_capita,tests_per_capita_error,"
         "observed_positivity,positivity_error,tests\n";
  double f_error = 0.0, g_error = 0.0;
  std::size_t g_cells = 0;
  for (const auto& e : table) {
    out << e.race << ',' << e.county << ','
        << format_double(e.observed_tests_per_capita) << ','
        << format_double(e.tests_per_capita_error) << ',';
    if (e.positivity_available) {
      out << format_double(e.observed_positivity) << ','
          << format_double(e.positivity_error);
      g_error += e.positivity_error;
      ++g_cells;
    } else {
      out << "NA,NA";
    }
    out << ',' << e.tests << '\n';
    f_error += e.tests_per_capita_error;
  }
  write_manifest(config, "ppc",
                 std::chrono::duration<double>(Clock::now() - start).count());
  std::cout << "mean tests-per-capita error "
            << format_double(f_error / static_cast<double>(table.size()), 4)
            << ", mean positivity error "
            << format_double(g_cells ? g_error / static_cast<double>(g_cells) : 0.0, 4)
            << " over " << table.size() << " cells\n";
}

void cmd_robustness(const RunConfig& config) {
  const auto start = Clock::now();
  if (config.tests_csv.empty() || config.cases_csv.empty() ||
      config.census_csv.empty()) {
    throw ConfigError("robustness requires the tests_csv/cases_csv/census_csv triple");
  }
  const auto split_list = [](const std::string& csv) {
    std::vector<std::string> items;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
      if (!item.empty()) items.push_back(item);
    }
    return items;
  };
  const auto methods = split_list(config.robustness_methods);
  const auto variants = split_list(config.robustness_variants);
  if (methods.empty() || variants.empty()) {
    throw ConfigError("robustness grid is empty");
  }

  const std::filesystem::path dir(config.out);
  std::filesystem::create_directories(dir);
  std::ofstream out(dir / "robustness.csv");
  if (!out) throw DataError("cannot write robustness.csv");
  out << "method,variant";
  for (const char* race : {"hispanic", "black", "white"}) {
    out << ',' << race << "_threshold," << race << "_lower," << race << "_upper";
  }
  for (const char* race : {"hispanic", "black"}) {
    out << ',' << race << "_ratio," << race << "_ratio_lower," << race
        << "_ratio_upper";
  }
  out << '\n';
  out.flush();

  for (const auto& method : methods) {
    for (const auto& variant : variants) {
      RunConfig run = config;
      run.method = method;
      run.variant = variant;
      std::cout << "robustness: method=" << method << " variant=" << variant
                << "\n";
      const ObservedCounts counts = load_input_counts(run);
      const Model model(counts, run.hyperparams());
      const FitResult fit = fit_pipeline(model, run);

      const auto find_threshold = [&](const std::string& race) {
        for (const auto& t : fit.report.weighted_thresholds) {
          if (t.race == race) return t.weighted_threshold;
        }
        throw DataError("race '" + race + "' missing from fit");
      };
      const auto find_ratio = [&](const std::string& race) {
        for (const auto& r : fit.report.ratios) {
          if (r.race == race) return r.ratio;
        }
        throw DataError("ratio for race '" + race + "' missing from fit");
      };
      out << method << ',' << variant;
      for (const char* race : {"hispanic", "black", "white"}) {
        const auto s = find_threshold(race);
        out << ',' << format_double(s.mean) << ',' << format_double(s.lower)
            << ',' << format_double(s.upper);
      }
      for (const char* race : {"hispanic", "black"}) {
        const auto s = find_ratio(race);
        out << ',' << format_double(s.mean) << ',' << format_double(s.lower)
            << ',' << format_double(s.upper);
      }
      out << '\n';
      out.flush();  // partial results survive a later row's failure
      check_convergence(fit.report, run.rhat_limit);
    }
  }
  write_manifest(config, "robustness",
                 std::chrono::duration<double>(Clock::now() - start).count());
}

int run_command(const std::string& name, const RunConfig& config) {
  try {
    if (name == "fit") cmd_fit(config);
    else if (name == "simulate") cmd_simulate(config);
    else if (name == "recover") cmd_recover(config);
    else if (name == "demo") cmd_demo(config);
    else if (name == "report") cmd_report(config);
    else if (name == "ppc") cmd_ppc(config);
    else if (name == "robustness") cmd_robustness(config);
    else throw ConfigError("unknown command '" + name + "'");
    return kExitOk;
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const ConvergenceError& e) {
    std::cerr << "convergence failure: " << e.what() << '\n';
    return kExitConvergence;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInternal;
  }
}

}  // namespace threshtest
