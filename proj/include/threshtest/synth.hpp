#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "threshtest/counts.hpp"
#include "threshtest/riskdist.hpp"

// Forward simulation from the generative model (for parameter-recovery
// experiments) and the exact discrete-group demonstration of why raw
// positivity rates mislead when risk distributions differ.

namespace threshtest {

struct ScenarioCell {
  int race = 0;
  int county = 0;
  double phi = 0.0;
  double delta = 0.0;
  double threshold = 0.0;
  std::int64_t population = 0;
};

struct TrueScenario {
  std::vector<std::string> race_names;
  std::vector<std::string> county_names;
  std::vector<ScenarioCell> cells;
  std::uint64_t seed = 1;

  const ScenarioCell* find(int race, int county) const;
};

// Draws tests ~ Poisson(population * f) and cases ~ Binomial(tests, g) per
// cell. Each cell owns an Rng seeded with scenario.seed XOR cell index, so
// output is deterministic and independent of evaluation order.
ObservedCounts simulate(const TrueScenario& scenario);

// Bundled recovery fixture: 50 counties x 3 races; county effects drawn
// from the seeded Rng; white thresholds around 0.03, Black exactly 1.5x and
// Hispanic exactly 3x the white threshold in the same county; populations
// log-uniform in [1e3, 1e5].
TrueScenario default_recovery_scenario(std::uint64_t seed = 20200816);

// Scenario files: leading key=value lines (currently just `seed`), then a
// CSV block `county_id,race,phi,delta,threshold,population`. Race and
// county order follow first appearance.
TrueScenario read_scenario(const std::filesystem::path& path);
void write_scenario(const TrueScenario& scenario,
                    const std::filesystem::path& path);

// --- discrete demonstration ---

struct RiskGroup {
  double mass = 0.0;  // population fraction within the race
  double risk = 0.0;  // probability of having the disease
};

struct DiscreteRace {
  std::string name;
  std::vector<RiskGroup> groups;  // masses sum to 1
  double threshold = 0.0;
  double population = 1.0;
};

struct DiscreteScenario {
  std::vector<DiscreteRace> races;
};

struct DemoRaceResult {
  std::string name;
  double threshold = 0.0;
  double tested_fraction = 0.0;
  double positivity = 0.0;  // NaN when nobody is tested
};

struct DemoReport {
  std::vector<DemoRaceResult> races;
  bool thresholds_equal = false;

  std::string to_text() const;
  std::string to_json() const;
};

// Exact arithmetic over the discrete groups: a group is tested when its
// risk strictly exceeds the race's threshold; positivity is the
// mass-weighted mean risk among tested groups.
DemoReport inframarginality_demo(const DiscreteScenario& scenario);

// Two races with identical 5%-risk asymptomatic halves; the symptomatic
// half carries 50% risk for white and 75% for Black. Both thresholds 0.10:
// equal thresholds, yet positivity 50% vs 75%.
DiscreteScenario default_demo_scenario();

// Identical risk distributions but thresholds 0.10 (white) vs 0.60 (Black):
// Black positivity comes out higher even though Black patients face the
// higher threshold -- the reverse-direction failure of the positivity rate.
DiscreteScenario reversal_demo_scenario();

// Writes tests/cases/census files in the raw ingest schema such that the
// `original` processing method reproduces `counts` up to integer rounding.
// Used to build robustness-grid fixtures from simulated data.
void write_raw_fixture(const ObservedCounts& counts,
                       const std::filesystem::path& dir,
                       double frac_race_known = 0.85,
                       double unknown_race_share = 0.15);

}  // namespace threshtest
