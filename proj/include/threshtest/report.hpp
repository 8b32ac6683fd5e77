#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "threshtest/model.hpp"
#include "threshtest/sampler.hpp"

// Post-processing of posterior draws into the headline outputs: test-weighted
// aggregate thresholds per race, minority:white threshold ratios, per-county
// threshold and positivity tables, aggregated risk-density curves and
// posterior predictive checks.
//
// Aggregation weights are the observed county test totals (summed over
// races). Intervals are central posterior quantiles (2.5%, 97.5%). Ratios
// are formed per draw and then summarized -- never as a ratio of summaries.

namespace threshtest {

struct PosteriorSummary {
  double mean = 0.0;
  double lower = 0.0;  // 2.5% quantile
  double upper = 0.0;  // 97.5% quantile
};

struct RaceThreshold {
  std::string race;
  PosteriorSummary weighted_threshold;
};

struct RaceRatio {
  std::string race;  // minority race; ratio is race : white
  PosteriorSummary ratio;
};

struct CountyThreshold {
  std::string race;
  std::string county;
  double mean_threshold = 0.0;
  std::int64_t tests = 0;  // for point sizing in scatter plots
};

struct PositivityEntry {
  std::string race;
  std::string county;
  bool available = false;  // false when no tests were administered
  double rate = 0.0;
  std::int64_t tests = 0;
};

struct PpcEntry {
  std::string race;
  std::string county;
  double observed_tests_per_capita = 0.0;
  double tests_per_capita_error = 0.0;  // observed - predicted
  bool positivity_available = false;
  double observed_positivity = 0.0;
  double positivity_error = 0.0;
  std::int64_t tests = 0;
};

struct DensityCurve {
  std::string race;
  std::vector<double> grid;     // risk values in (0, 1)
  std::vector<double> density;  // test-weighted posterior-mean density
  double aggregated_threshold = 0.0;
};

struct DisparityReport {
  std::vector<RaceThreshold> weighted_thresholds;
  std::vector<RaceRatio> ratios;
  std::vector<CountyThreshold> county_thresholds;
  std::vector<PositivityEntry> positivity;
  std::vector<PpcEntry> ppc;
  std::vector<DensityCurve> curves;
  double max_rhat = 0.0;
  double min_ess = 0.0;
  long divergences = 0;
};

// Per-draw test-weighted mean threshold per race, summarized.
std::vector<RaceThreshold> weighted_thresholds(const Model& model,
                                               const PosteriorDraws& draws);

// Minority:white weighted-threshold ratio per draw, summarized. Requires a
// race named "white".
std::vector<RaceRatio> threshold_ratios(const Model& model,
                                        const PosteriorDraws& draws);

// Posterior-mean threshold per (race, county).
std::vector<CountyThreshold> county_thresholds(const Model& model,
                                               const PosteriorDraws& draws);

// Raw positivity c/t per cell; cells with t = 0 are marked unavailable.
std::vector<PositivityEntry> positivity_table(const ObservedCounts& data);

// Observed-minus-predicted errors per cell for tests per capita and
// positivity (the latter omitted where t = 0).
std::vector<PpcEntry> ppc(const Model& model, const PosteriorDraws& draws);

// Test-weighted posterior-mean density of the risk distribution per race on
// a uniform interior grid, plus the aggregated threshold. Draws are strided
// down to at most max_draws for the density average.
std::vector<DensityCurve> risk_distribution_curves(const Model& model,
                                                   const PosteriorDraws& draws,
                                                   int grid_points = 2001,
                                                   int max_draws = 400);

DisparityReport build_report(const Model& model, const PosteriorDraws& draws,
                             int grid_points = 2001, int curve_max_draws = 400);

// Writes report.json plus plot-ready CSV tables (weighted_thresholds.csv,
// threshold_ratios.csv, county_thresholds.csv, positivity.csv, ppc.csv,
// risk_density_curves.csv) into the directory. Numbers carry 10 significant
// digits.
void write_report_files(const DisparityReport& report,
                        const std::filesystem::path& directory);

std::string report_to_json(const DisparityReport& report);

}  // namespace threshtest
