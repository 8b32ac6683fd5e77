#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace threshtest {

// Error classes the CLI maps to distinct exit codes.
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ConvergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CsvTable {
  std::filesystem::path path;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;  // 1-based source line per row

  // Column index by name; throws DataError naming the file.
  std::size_t column(const std::string& name) const;
};

// Reads a comma-separated file with a required header row. Handles quoted
// fields with doubled-quote escapes; requires consistent column counts.
// Errors carry the path and line number.
CsvTable read_csv(const std::filesystem::path& path);

// Strict numeric field parsers; throw DataError with file/line context.
double parse_double(const CsvTable& table, std::size_t row, std::size_t col);
std::int64_t parse_int(const CsvTable& table, std::size_t row, std::size_t col);

// Formats a double with 10 significant digits (the table round-trip
// precision) or 17 (full round-trip, used for draws).
std::string format_double(double value, int significant_digits = 10);

}  // namespace threshtest
