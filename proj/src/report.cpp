#include "threshtest/report.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include <json.hpp>

#include "threshtest/csv.hpp"
#include "threshtest/math.hpp"
#include "threshtest/riskdist.hpp"

namespace threshtest {

namespace {

PosteriorSummary summarize(const std::vector<double>& values) {
  PosteriorSummary s;
  s.mean = mean(values);
  s.lower = quantile(values, 0.025);
  s.upper = quantile(values, 0.975);
  return s;
}

// z_rd for one draw, for every (race, county) pair; [race][county].
std::vector<std::vector<double>> thresholds_for_draw(const Model& model,
                                                     const LatentParams& latent) {
  const std::size_t races = model.data().race_count();
  const std::size_t counties = model.data().county_count();
  std::vector<std::vector<double>> z(races, std::vector<double>(counties));
  for (std::size_t r = 0; r < races; ++r) {
    for (std::size_t d = 0; d < counties; ++d) {
      z[r][d] = logistic(latent.zeta_race[r] + latent.zeta_county[d]);
    }
  }
  return z;
}

std::vector<double> county_weights(const Model& model) {
  const auto totals = model.data().county_test_totals();
  std::vector<double> weights(totals.begin(), totals.end());
  double sum = 0.0;
  for (double w : weights) sum += w;
  if (sum <= 0.0) {
    throw DataError("weighted thresholds undefined: zero total tests");
  }
  return weights;
}

// Per-draw weighted mean threshold, [race][draw].
std::vector<std::vector<double>> weighted_threshold_draws(
    const Model& model, const PosteriorDraws& draws) {
  const std::vector<double> weights = county_weights(model);
  double weight_sum = 0.0;
  for (double w : weights) weight_sum += w;

  const std::size_t races = model.data().race_count();
  std::vector<std::vector<double>> out(races);
  for (auto& v : out) v.reserve(draws.total_draws());
  for (std::size_t i = 0; i < draws.total_draws(); ++i) {
    const LatentParams latent = model.constrain(draws.flat_draw(i));
    const auto z = thresholds_for_draw(model, latent);
    for (std::size_t r = 0; r < races; ++r) {
      double acc = 0.0;
      for (std::size_t d = 0; d < weights.size(); ++d) {
        acc += weights[d] * z[r][d];
      }
      out[r].push_back(acc / weight_sum);
    }
  }
  return out;
}

}  // namespace

std::vector<RaceThreshold> weighted_thresholds(const Model& model,
                                               const PosteriorDraws& draws) {
  const auto per_race = weighted_threshold_draws(model, draws);
  std::vector<RaceThreshold> out;
  for (std::size_t r = 0; r < per_race.size(); ++r) {
    out.push_back({model.data().race_names[r], summarize(per_race[r])});
  }
  return out;
}

std::vector<RaceRatio> threshold_ratios(const Model& model,
                                        const PosteriorDraws& draws) {
  const auto& races = model.data().race_names;
  const auto white_it = std::find(races.begin(), races.end(), "white");
  if (white_it == races.end()) {
    throw DataError("threshold ratios require a race named 'white'");
  }
  const std::size_t white = static_cast<std::size_t>(white_it - races.begin());
  const auto per_race = weighted_threshold_draws(model, draws);

  std::vector<RaceRatio> out;
  for (std::size_t r = 0; r < races.size(); ++r) {
    if (r == white) continue;
    std::vector<double> ratio(per_race[r].size());
    for (std::size_t i = 0; i < ratio.size(); ++i) {
      const double denom = per_race[white][i];
      if (denom <= 0.0) {
        throw DataError("white weighted threshold non-positive in a draw");
      }
      ratio[i] = per_race[r][i] / denom;
    }
    out.push_back({races[r], summarize(ratio)});
  }
  return out;
}

std::vector<CountyThreshold> county_thresholds(const Model& model,
                                               const PosteriorDraws& draws) {
  const std::size_t races = model.data().race_count();
  const std::size_t counties = model.data().county_count();
  std::vector<std::vector<double>> acc(races, std::vector<double>(counties, 0.0));
  for (std::size_t i = 0; i < draws.total_draws(); ++i) {
    const LatentParams latent = model.constrain(draws.flat_draw(i));
    const auto z = thresholds_for_draw(model, latent);
    for (std::size_t r = 0; r < races; ++r) {
      for (std::size_t d = 0; d < counties; ++d) acc[r][d] += z[r][d];
    }
  }
  std::vector<std::vector<std::int64_t>> tests(
      races, std::vector<std::int64_t>(counties, 0));
  for (const Cell& cell : model.data().cells) {
    tests[cell.race][cell.county] = cell.tests;
  }
  const double norm = static_cast<double>(draws.total_draws());
  std::vector<CountyThreshold> out;
  for (std::size_t r = 0; r < races; ++r) {
    for (std::size_t d = 0; d < counties; ++d) {
      out.push_back({model.data().race_names[r], model.data().county_names[d],
                     acc[r][d] / norm, tests[r][d]});
    }
  }
  return out;
}

std::vector<PositivityEntry> positivity_table(const ObservedCounts& data) {
  std::vector<PositivityEntry> out;
  for (const Cell& cell : data.cells) {
    PositivityEntry e;
    e.race = data.race_names[cell.race];
    e.county = data.county_names[cell.county];
    e.tests = cell.tests;
    if (cell.tests > 0) {
      e.available = true;
      e.rate = static_cast<double>(cell.cases) / static_cast<double>(cell.tests);
    }
    out.push_back(e);
  }
  return out;
}

std::vector<PpcEntry> ppc(const Model& model, const PosteriorDraws& draws) {
  const std::vector<CellPrediction> predicted = model.predict(draws);
  const auto& data = model.data();
  std::vector<PpcEntry> out;
  for (std::size_t i = 0; i < data.cells.size(); ++i) {
    const Cell& cell = data.cells[i];
    PpcEntry e;
    e.race = data.race_names[cell.race];
    e.county = data.county_names[cell.county];
    e.tests = cell.tests;
    e.observed_tests_per_capita =
        static_cast<double>(cell.tests) / static_cast<double>(cell.population);
    e.tests_per_capita_error = e.observed_tests_per_capita - predicted[i].f;
    if (cell.tests > 0) {
      e.positivity_available = true;
      e.observed_positivity =
          static_cast<double>(cell.cases) / static_cast<double>(cell.tests);
      e.positivity_error = e.observed_positivity - predicted[i].g;
    }
    out.push_back(e);
  }
  return out;
}

std::vector<DensityCurve> risk_distribution_curves(const Model& model,
                                                   const PosteriorDraws& draws,
                                                   int grid_points,
                                                   int max_draws) {
  if (grid_points < 3) throw std::invalid_argument("grid_points too small");
  const std::vector<double> weights = county_weights(model);
  double weight_sum = 0.0;
  for (double w : weights) weight_sum += w;

  const std::size_t races = model.data().race_count();
  const std::size_t counties = model.data().county_count();
  const std::size_t total = draws.total_draws();
  const std::size_t stride =
      std::max<std::size_t>(1, total / static_cast<std::size_t>(std::max(1, max_draws)));

  std::vector<double> grid(grid_points), grid_logit(grid_points);
  for (int i = 0; i < grid_points; ++i) {
    grid[i] = static_cast<double>(i + 1) / static_cast<double>(grid_points + 1);
    grid_logit[i] = logit(grid[i]);
  }

  std::vector<DensityCurve> curves(races);
  for (std::size_t r = 0; r < races; ++r) {
    curves[r].race = model.data().race_names[r];
    curves[r].grid = grid;
    curves[r].density.assign(grid_points, 0.0);
  }

  const double inv_sqrt_2pi = 1.0 / std::sqrt(2.0 * kPi);
  std::size_t used = 0;
  for (std::size_t i = 0; i < total; i += stride) {
    ++used;
    const LatentParams latent = model.constrain(draws.flat_draw(i));
    for (std::size_t r = 0; r < races; ++r) {
      for (std::size_t d = 0; d < counties; ++d) {
        if (weights[d] == 0.0) continue;
        const double phi = logistic(latent.phi_race[r] + latent.phi_county[d]);
        double log_delta = latent.log_delta_race[r];
        if (!latent.log_delta_county.empty()) log_delta += latent.log_delta_county[d];
        const double delta = std::exp(log_delta);
        const double offset = (-logit(phi) + 0.5 * delta * delta) / delta;
        const double w = weights[d] / weight_sum;
        for (int p = 0; p < grid_points; ++p) {
          const double s = grid_logit[p] / delta + offset;
          const double mix =
              phi * std::exp(-0.5 * (s - delta) * (s - delta)) +
              (1.0 - phi) * std::exp(-0.5 * s * s);
          curves[r].density[p] += w * mix * inv_sqrt_2pi /
                                  (delta * grid[p] * (1.0 - grid[p]));
        }
      }
    }
  }
  const auto thresholds = weighted_thresholds(model, draws);
  for (std::size_t r = 0; r < races; ++r) {
    for (double& v : curves[r].density) v /= static_cast<double>(used);
    curves[r].aggregated_threshold = thresholds[r].weighted_threshold.mean;
  }
  return curves;
}

DisparityReport build_report(const Model& model, const PosteriorDraws& draws,
                             int grid_points, int curve_max_draws) {
  DisparityReport report;
  report.weighted_thresholds = weighted_thresholds(model, draws);
  report.ratios = threshold_ratios(model, draws);
  report.county_thresholds = county_thresholds(model, draws);
  report.positivity = positivity_table(model.data());
  report.ppc = ppc(model, draws);
  report.curves =
      risk_distribution_curves(model, draws, grid_points, curve_max_draws);
  if (draws.chains >= 2) {
    const Diagnostics diag = diagnostics(draws);
    report.max_rhat = diag.max_rhat();
    report.min_ess = diag.min_ess();
    report.divergences = diag.divergences;
  } else {
    report.max_rhat = std::numeric_limits<double>::quiet_NaN();
    report.min_ess = std::numeric_limits<double>::quiet_NaN();
    for (std::uint8_t d : draws.divergent) report.divergences += d;
  }
  return report;
}

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  return out;
}

}  // namespace

void write_report_files(const DisparityReport& report,
                        const std::filesystem::path& directory) {
  std::filesystem::create_directories(directory);
  {
    auto out = open_out(directory / "weighted_thresholds.csv");
    out << "race,mean,lower95,upper95\n";
    for (const auto& t : report.weighted_thresholds) {
      out << t.race << ',' << format_double(t.weighted_threshold.mean) << ','
          << format_double(t.weighted_threshold.lower) << ','
          << format_double(t.weighted_threshold.upper) << '\n';
    }
  }
  {
    auto out = open_out(directory / "threshold_ratios.csv");
    out << "race,mean,lower95,upper95\n";
    for (const auto& r : report.ratios) {
      out << r.race << ',' << format_double(r.ratio.mean) << ','
          << format_double(r.ratio.lower) << ',' << format_double(r.ratio.upper)
          << '\n';
    }
  }
  {
    auto out = open_out(directory / "county_thresholds.csv");
    out << "race,county,mean_threshold,tests\n";
    for (const auto& t : report.county_thresholds) {
      out << t.race << ',' << t.county << ',' << format_double(t.mean_threshold)
          << ',' << t.tests << '\n';
    }
  }
  {
    auto out = open_out(directory / "positivity.csv");
    out << "race,county,positivity,tests\n";
    for (const auto& p : report.positivity) {
      out << p.race << ',' << p.county << ','
          << (p.available ? format_double(p.rate) : "NA") << ',' << p.tests
          << '\n';
    }
  }
  {
    auto out = open_out(directory / "ppc.csv");
    out << "race,county,observed_tests_per_capita,tests_per_capita_error,"
           "observed_positivity,positivity_error,tests\n";
    for (const auto& e : report.ppc) {
      out << e.race << ',' << e.county << ','
          << format_double(e.observed_tests_per_capita) << ','
          << format_double(e.tests_per_capita_error) << ',';
      if (e.positivity_available) {
        out << format_double(e.observed_positivity) << ','
            << format_double(e.positivity_error);
      } else {
        out << "NA,NA";
      }
      out << ',' << e.tests << '\n';
    }
  }
  {
    auto out = open_out(directory / "risk_density_curves.csv");
    out << "race,risk,density\n";
    for (const auto& curve : report.curves) {
      for (std::size_t i = 0; i < curve.grid.size(); ++i) {
        out << curve.race << ',' << format_double(curve.grid[i]) << ','
            << format_double(curve.density[i]) << '\n';
      }
    }
  }
  {
    auto out = open_out(directory / "report.json");
    out << report_to_json(report) << '\n';
  }
}

std::string report_to_json(const DisparityReport& report) {
  nlohmann::json j;
  const auto summary_json = [](const PosteriorSummary& s) {
    return nlohmann::json{{"mean", s.mean}, {"lower95", s.lower}, {"upper95", s.upper}};
  };
  for (const auto& t : report.weighted_thresholds) {
    j["weighted_thresholds"][t.race] = summary_json(t.weighted_threshold);
  }
  for (const auto& r : report.ratios) {
    j["ratios"][r.race] = summary_json(r.ratio);
  }
  j["county_thresholds"] = nlohmann::json::array();
  for (const auto& t : report.county_thresholds) {
    j["county_thresholds"].push_back({{"race", t.race},
                                      {"county", t.county},
                                      {"mean_threshold", t.mean_threshold},
                                      {"tests", t.tests}});
  }
  j["positivity"] = nlohmann::json::array();
  for (const auto& p : report.positivity) {
    nlohmann::json e{{"race", p.race}, {"county", p.county}, {"tests", p.tests}};
    if (p.available) {
      e["rate"] = p.rate;
    } else {
      e["rate"] = nullptr;
    }
    j["positivity"].push_back(e);
  }
  j["ppc"] = nlohmann::json::array();
  for (const auto& e : report.ppc) {
    nlohmann::json je{{"race", e.race},
                      {"county", e.county},
                      {"observed_tests_per_capita", e.observed_tests_per_capita},
                      {"tests_per_capita_error", e.tests_per_capita_error},
                      {"tests", e.tests}};
    if (e.positivity_available) {
      je["observed_positivity"] = e.observed_positivity;
      je["positivity_error"] = e.positivity_error;
    }
    j["ppc"].push_back(je);
  }
  for (const auto& curve : report.curves) {
    j["risk_density_curves"][curve.race] = {
        {"aggregated_threshold", curve.aggregated_threshold},
        {"risk", curve.grid},
        {"density", curve.density}};
  }
  j["diagnostics"] = {{"max_rhat", report.max_rhat},
                      {"min_ess", report.min_ess},
                      {"divergences", report.divergences}};
  return j.dump(2);
}

}  // namespace threshtest
