#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "threshtest/counts.hpp"

// Raw data loading. Counts arrive in two files sharing one schema -- tests
// and cases -- because the source reports race breakdowns (white/Black) and
// an ethnicity fraction (Hispanic share of records with known ethnicity)
// separately, never cross-tabulated. A census file supplies populations for
// the three output groups.
//
// CSV schemas (UTF-8, header row required):
//   tests.csv / cases.csv:
//     county_id,total,white,black,frac_hispanic_of_known_ethnicity,frac_race_known
//   census.csv:
//     county_id,pop_nh_white,pop_nh_black,pop_hispanic
//
// Output groups, in id order: white (non-Hispanic white), black
// (non-Hispanic Black), hispanic.

namespace threshtest {

enum class ProcessingMethod { original, raw_counts, subtract_ethnicity };

ProcessingMethod parse_method(const std::string& name);
std::string method_name(ProcessingMethod method);

inline constexpr int kGroupWhite = 0;
inline constexpr int kGroupBlack = 1;
inline constexpr int kGroupHispanic = 2;
inline const std::array<std::string, 3> kGroupNames = {"white", "black",
                                                       "hispanic"};

// One side (tests or cases) of a county's raw counts.
struct RawSideCounts {
  double total = 0;
  double white = 0;
  double black = 0;
  double frac_hispanic = 0;    // Hispanic share of records with known ethnicity
  double frac_race_known = 1;  // share of records with known race
};

struct RawCountyRecord {
  std::string county_id;
  RawSideCounts tests;
  RawSideCounts cases;
  // Populations may be absent until the census join;
  // filter_counties requires them.
  std::optional<double> pop_nh_white, pop_nh_black, pop_hispanic;
};

struct ProcessedCounty {
  std::string county_id;
  std::array<std::int64_t, 3> tests{};  // indexed by group id
  std::array<std::int64_t, 3> cases{};
};

// Derives per-group counts from one raw record:
//   original           white/Black scaled by (1 - f_hisp) / f_race_known,
//                      Hispanic = total * f_hisp
//   raw_counts         white/Black passed through, Hispanic = total * f_hisp
//   subtract_ethnicity white minus the Hispanic count, Black passed through
// Results are rounded to the nearest integer (half away from zero), clamped
// to be nonnegative, then cases reduced to at most tests per group. Every
// clamp appends a warning.
ProcessedCounty process_county(const RawCountyRecord& record,
                               ProcessingMethod method,
                               std::vector<std::string>* warnings = nullptr);

struct FilterSummary {
  std::size_t counties_in = 0;
  std::size_t counties_kept = 0;
  // Share of each group's census population living in retained counties.
  double white_share = 0, black_share = 0, hispanic_share = 0;
};

// Keeps counties whose Black and Hispanic census populations are both at
// least min_population. Errors if a record lacks populations.
std::vector<RawCountyRecord> filter_counties(
    const std::vector<RawCountyRecord>& records, std::int64_t min_population,
    FilterSummary* summary = nullptr);

struct LoadResult {
  ObservedCounts counts;
  FilterSummary filter;
  std::vector<std::string> warnings;
};

// Full pipeline: parse the three files, join on county_id, apply the
// processing method and population filter, and emit validated counts
// ordered by county_id then race id.
LoadResult load(const std::filesystem::path& tests_path,
                const std::filesystem::path& cases_path,
                const std::filesystem::path& census_path,
                ProcessingMethod method, std::int64_t min_population = 500);

// Pre-aggregated alternative input (written by the simulator):
//   counts.csv: county_id,race,population,tests,cases
ObservedCounts load_counts_csv(const std::filesystem::path& path);
void write_counts_csv(const ObservedCounts& counts,
                      const std::filesystem::path& path);

}  // namespace threshtest
