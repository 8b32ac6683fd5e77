#include "threshtest/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include <json.hpp>

#include "threshtest/csv.hpp"
#include "threshtest/math.hpp"
#include "threshtest/rng.hpp"

namespace threshtest {

const ScenarioCell* TrueScenario::find(int race, int county) const {
  for (const auto& cell : cells) {
    if (cell.race == race && cell.county == county) return &cell;
  }
  return nullptr;
}

ObservedCounts simulate(const TrueScenario& scenario) {
  ObservedCounts counts;
  counts.race_names = scenario.race_names;
  counts.county_names = scenario.county_names;
  counts.cells.reserve(scenario.cells.size());
  for (std::size_t index = 0; index < scenario.cells.size(); ++index) {
    const ScenarioCell& sc = scenario.cells[index];
    Rng rng(scenario.seed ^ static_cast<std::uint64_t>(index));
    const DiscriminantParams params(sc.phi, sc.delta);
    const Threshold z(sc.threshold);
    const double f = ccdf_above(params, z);
    Cell cell;
    cell.race = sc.race;
    cell.county = sc.county;
    cell.population = sc.population;
    cell.tests = rng.poisson(static_cast<double>(sc.population) * f);
    cell.cases = cell.tests > 0
                     ? rng.binomial(cell.tests, mean_above(params, z))
                     : 0;
    counts.cells.push_back(cell);
  }
  counts.validate();
  return counts;
}

TrueScenario default_recovery_scenario(std::uint64_t seed) {
  constexpr int kCounties = 50;
  const std::vector<double> prevalence = {0.020, 0.035, 0.030};
  const std::vector<double> delta = {1.8, 2.0, 2.2};
  const std::vector<double> threshold_multiplier = {1.0, 1.5, 3.0};
  const double white_threshold_logit = logit(0.032);

  TrueScenario scenario;
  scenario.seed = seed;
  scenario.race_names = {"white", "black", "hispanic"};
  for (int d = 0; d < kCounties; ++d) {
    char name[16];
    std::snprintf(name, sizeof name, "county%02d", d + 1);
    scenario.county_names.emplace_back(name);
  }

  // County effect draws come from their own stream so the per-cell
  // simulation seeds stay untouched.
  Rng rng(seed ^ 0xc0ffee0ddba11ull);
  std::vector<double> zeta_county(kCounties), phi_county(kCounties);
  for (int d = 0; d < kCounties; ++d) zeta_county[d] = rng.uniform(-0.45, 0.45);
  for (int d = 0; d < kCounties; ++d) phi_county[d] = rng.uniform(-0.30, 0.30);
  const auto center = [](std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m += x;
    m /= static_cast<double>(v.size());
    for (double& x : v) x -= m;
  };
  center(zeta_county);
  center(phi_county);

  for (int d = 0; d < kCounties; ++d) {
    const double white_threshold =
        logistic(white_threshold_logit + zeta_county[d]);
    for (int r = 0; r < 3; ++r) {
      ScenarioCell cell;
      cell.race = r;
      cell.county = d;
      cell.phi = logistic(logit(prevalence[r]) + phi_county[d]);
      cell.delta = delta[r];
      cell.threshold = threshold_multiplier[r] * white_threshold;
      cell.population = static_cast<std::int64_t>(
          std::llround(std::exp(rng.uniform(std::log(1e3), std::log(1e5)))));
      scenario.cells.push_back(cell);
    }
  }
  return scenario;
}

TrueScenario read_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open scenario '" + path.string() + "'");

  TrueScenario scenario;
  std::map<std::string, int> race_index, county_index;
  std::string line;
  std::size_t line_number = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen && line.find('=') != std::string::npos) {
      const auto eq = line.find('=');
      const std::string key = line.substr(0, eq);
      const std::string value = line.substr(eq + 1);
      if (key == "seed") {
        scenario.seed = std::stoull(value);
      } else {
        throw DataError(path.string() + ":" + std::to_string(line_number) +
                        ": unknown scenario key '" + key + "'");
      }
      continue;
    }
    if (!header_seen) {
      if (line != "county_id,race,phi,delta,threshold,population") {
        throw DataError(path.string() + ":" + std::to_string(line_number) +
                        ": expected cell header "
                        "'county_id,race,phi,delta,threshold,population'");
      }
      header_seen = true;
      continue;
    }
    std::stringstream ss(line);
    std::string county, race, field;
    ScenarioCell cell;
    try {
      std::getline(ss, county, ',');
      std::getline(ss, race, ',');
      std::getline(ss, field, ',');
      cell.phi = std::stod(field);
      std::getline(ss, field, ',');
      cell.delta = std::stod(field);
      std::getline(ss, field, ',');
      cell.threshold = std::stod(field);
      std::getline(ss, field, ',');
      cell.population = std::stoll(field);
    } catch (const std::exception&) {
      throw DataError(path.string() + ":" + std::to_string(line_number) +
                      ": malformed scenario cell");
    }
    auto [rit, rnew] = race_index.try_emplace(
        race, static_cast<int>(scenario.race_names.size()));
    if (rnew) scenario.race_names.push_back(race);
    auto [cit, cnew] = county_index.try_emplace(
        county, static_cast<int>(scenario.county_names.size()));
    if (cnew) scenario.county_names.push_back(county);
    cell.race = rit->second;
    cell.county = cit->second;
    scenario.cells.push_back(cell);
  }
  if (scenario.cells.empty()) {
    throw DataError(path.string() + ": scenario has no cells");
  }
  return scenario;
}

void write_scenario(const TrueScenario& scenario,
                    const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << "seed=" << scenario.seed << '\n';
  out << "county_id,race,phi,delta,threshold,population\n";
  for (const auto& cell : scenario.cells) {
    out << scenario.county_names[cell.county] << ','
        << scenario.race_names[cell.race] << ',' << format_double(cell.phi, 17)
        << ',' << format_double(cell.delta, 17) << ','
        << format_double(cell.threshold, 17) << ',' << cell.population << '\n';
  }
}

DemoReport inframarginality_demo(const DiscreteScenario& scenario) {
  DemoReport report;
  for (const DiscreteRace& race : scenario.races) {
    double mass_sum = 0.0;
    for (const RiskGroup& group : race.groups) {
      if (group.risk < 0.0 || group.risk > 1.0 || group.mass < 0.0) {
        throw std::invalid_argument("inframarginality_demo: invalid group");
      }
      mass_sum += group.mass;
    }
    if (std::fabs(mass_sum - 1.0) > 1e-9) {
      throw std::invalid_argument(
          "inframarginality_demo: group masses must sum to 1 (race " +
          race.name + ")");
    }
    DemoRaceResult result;
    result.name = race.name;
    result.threshold = race.threshold;
    double tested = 0.0;
    double positive = 0.0;
    for (const RiskGroup& group : race.groups) {
      if (group.risk > race.threshold) {
        tested += group.mass;
        positive += group.mass * group.risk;
      }
    }
    result.tested_fraction = tested;
    result.positivity =
        tested > 0.0 ? positive / tested
                     : std::numeric_limits<double>::quiet_NaN();
    report.races.push_back(result);
  }
  report.thresholds_equal = true;
  for (const auto& r : report.races) {
    if (r.threshold != report.races.front().threshold) {
      report.thresholds_equal = false;
    }
  }
  return report;
}

std::string DemoReport::to_text() const {
  std::ostringstream out;
  out << "Positivity under per-race risk groups and testing thresholds\n";
  for (const auto& r : races) {
    out << "  " << r.name << ": threshold " << format_double(r.threshold, 6)
        << ", tested fraction " << format_double(r.tested_fraction, 6)
        << ", positivity ";
    if (std::isnan(r.positivity)) {
      out << "n/a (nobody tested)";
    } else {
      out << format_double(100.0 * r.positivity, 6) << "%";
    }
    out << '\n';
  }
  out << (thresholds_equal
              ? "Thresholds are EQUAL across races; any positivity gap above "
                "is an artifact of differing risk distributions.\n"
              : "Thresholds DIFFER across races; the positivity ordering "
                "need not match the threshold ordering.\n");
  return out.str();
}

std::string DemoReport::to_json() const {
  nlohmann::json j;
  j["thresholds_equal"] = thresholds_equal;
  j["races"] = nlohmann::json::array();
  for (const auto& r : races) {
    nlohmann::json jr;
    jr["name"] = r.name;
    jr["threshold"] = r.threshold;
    jr["tested_fraction"] = r.tested_fraction;
    if (std::isnan(r.positivity)) {
      jr["positivity"] = nullptr;
    } else {
      jr["positivity"] = r.positivity;
    }
    j["races"].push_back(jr);
  }
  return j.dump(2);
}

DiscreteScenario default_demo_scenario() {
  DiscreteScenario scenario;
  scenario.races = {
      {"white", {{0.5, 0.05}, {0.5, 0.50}}, 0.10, 10000.0},
      {"black", {{0.5, 0.05}, {0.5, 0.75}}, 0.10, 10000.0},
  };
  return scenario;
}

DiscreteScenario reversal_demo_scenario() {
  const std::vector<RiskGroup> groups = {{0.5, 0.05}, {0.25, 0.50}, {0.25, 0.75}};
  DiscreteScenario scenario;
  scenario.races = {
      {"white", groups, 0.10, 10000.0},
      {"black", groups, 0.60, 10000.0},
  };
  return scenario;
}

void write_raw_fixture(const ObservedCounts& counts,
                       const std::filesystem::path& dir,
                       double frac_race_known, double unknown_race_share) {
  if (counts.race_names.size() != 3 || counts.race_names[0] != "white" ||
      counts.race_names[1] != "black" || counts.race_names[2] != "hispanic") {
    throw std::invalid_argument(
        "write_raw_fixture: counts must use the white/black/hispanic groups");
  }
  std::filesystem::create_directories(dir);
  std::ofstream tests(dir / "tests.csv");
  std::ofstream cases(dir / "cases.csv");
  std::ofstream census(dir / "census.csv");
  if (!tests || !cases || !census) {
    throw DataError("cannot write raw fixture under '" + dir.string() + "'");
  }
  const std::string header =
      "county_id,total,white,black,frac_hispanic_of_known_ethnicity,frac_race_known\n";
  tests << header;
  cases << header;
  census << "county_id,pop_nh_white,pop_nh_black,pop_hispanic\n";

  for (std::size_t d = 0; d < counts.county_count(); ++d) {
    std::array<std::int64_t, 3> t{}, c{}, pop{};
    for (const Cell& cell : counts.cells) {
      if (static_cast<std::size_t>(cell.county) != d) continue;
      t[cell.race] = cell.tests;
      c[cell.race] = cell.cases;
      pop[cell.race] = cell.population;
    }
    // Inverse of the `original` formulas: total inflated by the
    // unknown-race share, Hispanic share taken against that total, and
    // race-specific counts rescaled so the scaling cancels on ingest.
    const auto emit = [&](std::ofstream& out, const std::array<std::int64_t, 3>& v) {
      const double known = static_cast<double>(v[0] + v[1] + v[2]);
      const double total = std::ceil(known * (1.0 + unknown_race_share));
      const double f_hisp = total > 0 ? static_cast<double>(v[2]) / total : 0.0;
      const double scale = f_hisp < 1.0 ? frac_race_known / (1.0 - f_hisp) : 0.0;
      out << counts.county_names[d] << ',' << format_double(total, 17) << ','
          << format_double(static_cast<double>(v[0]) * scale, 17) << ','
          << format_double(static_cast<double>(v[1]) * scale, 17) << ','
          << format_double(f_hisp, 17) << ','
          << format_double(frac_race_known, 17) << '\n';
    };
    emit(tests, t);
    emit(cases, c);
    census << counts.county_names[d] << ',' << pop[0] << ',' << pop[1] << ','
           << pop[2] << '\n';
  }
}

}  // namespace threshtest
