#include "threshtest/counts.hpp"

#include <set>
#include <stdexcept>
#include <utility>

namespace threshtest {

void ObservedCounts::validate() const {
  if (race_names.empty() || county_names.empty()) {
    throw std::invalid_argument("ObservedCounts: empty race or county table");
  }
  std::set<std::pair<int, int>> seen;
  for (const Cell& cell : cells) {
    if (cell.race < 0 || static_cast<std::size_t>(cell.race) >= race_names.size() ||
        cell.county < 0 ||
        static_cast<std::size_t>(cell.county) >= county_names.size()) {
      throw std::invalid_argument("ObservedCounts: cell id out of range");
    }
    const std::string where =
        " (race " + race_names[cell.race] + ", county " + county_names[cell.county] + ")";
    if (cell.population < 1) {
      throw std::invalid_argument("ObservedCounts: population must be >= 1" + where);
    }
    if (cell.tests < 0 || cell.cases < 0) {
      throw std::invalid_argument("ObservedCounts: negative count" + where);
    }
    if (cell.cases > cell.tests) {
      throw std::invalid_argument("ObservedCounts: cases exceed tests" + where);
    }
    if (!seen.insert({cell.race, cell.county}).second) {
      throw std::invalid_argument("ObservedCounts: duplicate cell" + where);
    }
  }
}

std::vector<std::int64_t> ObservedCounts::county_test_totals() const {
  std::vector<std::int64_t> totals(county_names.size(), 0);
  for (const Cell& cell : cells) totals[cell.county] += cell.tests;
  return totals;
}

}  // namespace threshtest
