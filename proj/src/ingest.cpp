#include "threshtest/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

#include "threshtest/csv.hpp"

namespace threshtest {

namespace {

std::int64_t round_half_away(double x) { return std::llround(x); }

// Per-group counts for one side (tests or cases), before rounding.
std::array<double, 3> side_counts(const RawSideCounts& side,
                                  ProcessingMethod method,
                                  const std::string& county,
                                  const char* side_name) {
  if (side.frac_hispanic < 0 || side.frac_hispanic > 1 ||
      side.frac_race_known < 0 || side.frac_race_known > 1) {
    throw DataError("county " + county + ": " + side_name +
                    " fractions must lie in [0, 1]");
  }
  if (side.total < 0 || side.white < 0 || side.black < 0) {
    throw DataError("county " + county + ": negative " +
                    std::string(side_name) + " count");
  }
  if (side.white > side.total || side.black > side.total) {
    throw DataError("county " + county + ": per-group " +
                    std::string(side_name) + " count exceeds total");
  }
  const double hispanic = side.total * side.frac_hispanic;
  switch (method) {
    case ProcessingMethod::original: {
      if (side.frac_race_known == 0) {
        throw DataError("county " + county +
                        ": original method requires frac_race_known > 0 (" +
                        side_name + ")");
      }
      const double scale = (1.0 - side.frac_hispanic) / side.frac_race_known;
      return {side.white * scale, side.black * scale, hispanic};
    }
    case ProcessingMethod::raw_counts:
      return {side.white, side.black, hispanic};
    case ProcessingMethod::subtract_ethnicity:
      return {side.white - hispanic, side.black, hispanic};
  }
  throw std::logic_error("unreachable");
}

}  // namespace

ProcessingMethod parse_method(const std::string& name) {
  if (name == "original") return ProcessingMethod::original;
  if (name == "raw" || name == "raw_counts") return ProcessingMethod::raw_counts;
  if (name == "subtract" || name == "subtract_ethnicity") {
    return ProcessingMethod::subtract_ethnicity;
  }
  throw ConfigError("unknown processing method '" + name +
                    "' (expected original | raw | subtract)");
}

std::string method_name(ProcessingMethod method) {
  switch (method) {
    case ProcessingMethod::original: return "original";
    case ProcessingMethod::raw_counts: return "raw";
    case ProcessingMethod::subtract_ethnicity: return "subtract";
  }
  return "?";
}

ProcessedCounty process_county(const RawCountyRecord& record,
                               ProcessingMethod method,
                               std::vector<std::string>* warnings) {
  const auto tests_raw = side_counts(record.tests, method, record.county_id, "tests");
  const auto cases_raw = side_counts(record.cases, method, record.county_id, "cases");

  ProcessedCounty out;
  out.county_id = record.county_id;
  const auto warn = [&](const std::string& message) {
    if (warnings) warnings->push_back("county " + record.county_id + ": " + message);
  };
  for (int group = 0; group < 3; ++group) {
    std::int64_t t = round_half_away(tests_raw[group]);
    std::int64_t c = round_half_away(cases_raw[group]);
    if (t < 0) {
      warn(kGroupNames[group] + " tests clamped to 0 (was " + std::to_string(t) + ")");
      t = 0;
    }
    if (c < 0) {
      warn(kGroupNames[group] + " cases clamped to 0 (was " + std::to_string(c) + ")");
      c = 0;
    }
    if (c > t) {
      warn(kGroupNames[group] + " cases reduced from " + std::to_string(c) +
           " to tests " + std::to_string(t));
      c = t;
    }
    out.tests[group] = t;
    out.cases[group] = c;
  }
  return out;
}

std::vector<RawCountyRecord> filter_counties(
    const std::vector<RawCountyRecord>& records, std::int64_t min_population,
    FilterSummary* summary) {
  FilterSummary s;
  s.counties_in = records.size();
  double white_total = 0, black_total = 0, hispanic_total = 0;
  double white_kept = 0, black_kept = 0, hispanic_kept = 0;
  std::vector<RawCountyRecord> kept;
  for (const auto& r : records) {
    if (!r.pop_nh_white || !r.pop_nh_black || !r.pop_hispanic) {
      throw DataError("county " + r.county_id + ": missing census population");
    }
    white_total += *r.pop_nh_white;
    black_total += *r.pop_nh_black;
    hispanic_total += *r.pop_hispanic;
    if (*r.pop_nh_black >= static_cast<double>(min_population) &&
        *r.pop_hispanic >= static_cast<double>(min_population)) {
      kept.push_back(r);
      white_kept += *r.pop_nh_white;
      black_kept += *r.pop_nh_black;
      hispanic_kept += *r.pop_hispanic;
    }
  }
  s.counties_kept = kept.size();
  s.white_share = white_total > 0 ? white_kept / white_total : 0;
  s.black_share = black_total > 0 ? black_kept / black_total : 0;
  s.hispanic_share = hispanic_total > 0 ? hispanic_kept / hispanic_total : 0;
  if (summary) *summary = s;
  return kept;
}

namespace {

RawSideCounts read_side(const CsvTable& table, std::size_t row) {
  RawSideCounts side;
  side.total = parse_double(table, row, table.column("total"));
  side.white = parse_double(table, row, table.column("white"));
  side.black = parse_double(table, row, table.column("black"));
  side.frac_hispanic =
      parse_double(table, row, table.column("frac_hispanic_of_known_ethnicity"));
  side.frac_race_known = parse_double(table, row, table.column("frac_race_known"));
  return side;
}

}  // namespace

LoadResult load(const std::filesystem::path& tests_path,
                const std::filesystem::path& cases_path,
                const std::filesystem::path& census_path,
                ProcessingMethod method, std::int64_t min_population) {
  const CsvTable tests_table = read_csv(tests_path);
  const CsvTable cases_table = read_csv(cases_path);
  const CsvTable census_table = read_csv(census_path);

  std::map<std::string, RawCountyRecord> by_county;
  const std::size_t tests_id = tests_table.column("county_id");
  for (std::size_t row = 0; row < tests_table.rows.size(); ++row) {
    const std::string& county = tests_table.rows[row][tests_id];
    auto [it, inserted] = by_county.try_emplace(county);
    if (!inserted) {
      throw DataError(tests_table.path.string() + ":" +
                      std::to_string(tests_table.line_numbers[row]) +
                      ": duplicate county '" + county + "'");
    }
    it->second.county_id = county;
    it->second.tests = read_side(tests_table, row);
  }

  const std::size_t cases_id = cases_table.column("county_id");
  std::map<std::string, bool> cases_seen;
  for (std::size_t row = 0; row < cases_table.rows.size(); ++row) {
    const std::string& county = cases_table.rows[row][cases_id];
    if (!cases_seen.emplace(county, true).second) {
      throw DataError(cases_table.path.string() + ":" +
                      std::to_string(cases_table.line_numbers[row]) +
                      ": duplicate county '" + county + "'");
    }
    auto it = by_county.find(county);
    if (it == by_county.end()) {
      throw DataError("county '" + county + "' present in " +
                      cases_table.path.string() + " but absent from " +
                      tests_table.path.string());
    }
    it->second.cases = read_side(cases_table, row);
  }
  for (const auto& [county, record] : by_county) {
    if (!cases_seen.count(county)) {
      throw DataError("county '" + county + "' present in " +
                      tests_table.path.string() + " but absent from " +
                      cases_table.path.string());
    }
  }

  const std::size_t census_id = census_table.column("county_id");
  const std::size_t col_white = census_table.column("pop_nh_white");
  const std::size_t col_black = census_table.column("pop_nh_black");
  const std::size_t col_hisp = census_table.column("pop_hispanic");
  for (std::size_t row = 0; row < census_table.rows.size(); ++row) {
    const std::string& county = census_table.rows[row][census_id];
    auto it = by_county.find(county);
    if (it == by_county.end()) continue;  // census may cover extra counties
    if (it->second.pop_nh_white) {
      throw DataError(census_table.path.string() + ":" +
                      std::to_string(census_table.line_numbers[row]) +
                      ": duplicate county '" + county + "'");
    }
    it->second.pop_nh_white = parse_double(census_table, row, col_white);
    it->second.pop_nh_black = parse_double(census_table, row, col_black);
    it->second.pop_hispanic = parse_double(census_table, row, col_hisp);
  }
  for (const auto& [county, record] : by_county) {
    if (!record.pop_nh_white) {
      throw DataError("county '" + county + "' absent from census file " +
                      census_path.string());
    }
  }

  std::vector<RawCountyRecord> records;
  records.reserve(by_county.size());
  for (auto& [county, record] : by_county) records.push_back(std::move(record));

  LoadResult result;
  const auto kept = filter_counties(records, min_population, &result.filter);

  ObservedCounts& counts = result.counts;
  counts.race_names.assign(kGroupNames.begin(), kGroupNames.end());
  for (const auto& record : kept) {  // std::map iteration kept them sorted
    const int county_index = static_cast<int>(counts.county_names.size());
    counts.county_names.push_back(record.county_id);
    const ProcessedCounty processed =
        process_county(record, method, &result.warnings);
    const std::array<double, 3> pops = {*record.pop_nh_white, *record.pop_nh_black,
                                        *record.pop_hispanic};
    for (int group = 0; group < 3; ++group) {
      Cell cell;
      cell.race = group;
      cell.county = county_index;
      cell.population = round_half_away(pops[group]);
      cell.tests = processed.tests[group];
      cell.cases = processed.cases[group];
      counts.cells.push_back(cell);
    }
  }
  try {
    counts.validate();
  } catch (const std::invalid_argument& e) {
    throw DataError(e.what());
  }
  return result;
}

ObservedCounts load_counts_csv(const std::filesystem::path& path) {
  const CsvTable table = read_csv(path);
  const std::size_t col_county = table.column("county_id");
  const std::size_t col_race = table.column("race");
  const std::size_t col_pop = table.column("population");
  const std::size_t col_tests = table.column("tests");
  const std::size_t col_cases = table.column("cases");

  ObservedCounts counts;
  std::map<std::string, int> race_index, county_index;
  for (std::size_t row = 0; row < table.rows.size(); ++row) {
    const std::string& race = table.rows[row][col_race];
    const std::string& county = table.rows[row][col_county];
    auto [rit, rnew] = race_index.try_emplace(race, static_cast<int>(counts.race_names.size()));
    if (rnew) counts.race_names.push_back(race);
    auto [cit, cnew] = county_index.try_emplace(county, static_cast<int>(counts.county_names.size()));
    if (cnew) counts.county_names.push_back(county);
    Cell cell;
    cell.race = rit->second;
    cell.county = cit->second;
    cell.population = parse_int(table, row, col_pop);
    cell.tests = parse_int(table, row, col_tests);
    cell.cases = parse_int(table, row, col_cases);
    counts.cells.push_back(cell);
  }
  try {
    counts.validate();
  } catch (const std::invalid_argument& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  return counts;
}

void write_counts_csv(const ObservedCounts& counts,
                      const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << "county_id,race,population,tests,cases\n";
  for (const Cell& cell : counts.cells) {
    out << counts.county_names[cell.county] << ',' << counts.race_names[cell.race]
        << ',' << cell.population << ',' << cell.tests << ',' << cell.cases
        << '\n';
  }
}

}  // namespace threshtest
