#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace threshtest {

// One (race, county) observation: population, cumulative tests and
// cumulative positive tests.
struct Cell {
  int race = 0;
  int county = 0;
  std::int64_t population = 0;
  std::int64_t tests = 0;
  std::int64_t cases = 0;
};

// Aggregate counts per (race, county) cell. race/county ids index the name
// tables; counties without cells are allowed (they then carry prior-only
// information in the model).
struct ObservedCounts {
  std::vector<std::string> race_names;
  std::vector<std::string> county_names;
  std::vector<Cell> cells;

  std::size_t race_count() const { return race_names.size(); }
  std::size_t county_count() const { return county_names.size(); }

  // Enforces: ids in range, cases <= tests, population >= 1, nonnegative
  // counts, unique (race, county) pairs. Throws std::invalid_argument.
  void validate() const;

  // Total observed tests in a county across races (aggregation weight).
  std::vector<std::int64_t> county_test_totals() const;
};

}  // namespace threshtest
