#include "threshtest/csv.hpp"

#include <cstdio>
#include <fstream>

namespace threshtest {

namespace {

std::vector<std::string> split_line(const std::string& line,
                                    const std::filesystem::path& path,
                                    std::size_t line_number) {
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(field);
      field.clear();
    } else if (c != '\r') {
      field.push_back(c);
    }
  }
  if (quoted) {
    throw DataError(path.string() + ":" + std::to_string(line_number) +
                    ": unterminated quoted field");
  }
  fields.push_back(field);
  return fields;
}

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t");
  std::size_t e = s.find_last_not_of(" \t");
  if (b == std::string::npos) return "";
  return s.substr(b, e - b + 1);
}

}  // namespace

std::size_t CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  throw DataError(path.string() + ": missing required column '" + name + "'");
}

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw DataError("cannot open '" + path.string() + "'");
  }
  CsvTable table;
  table.path = path;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (trim(line).empty()) continue;
    auto fields = split_line(line, path, line_number);
    for (auto& f : fields) f = trim(f);
    if (table.header.empty()) {
      table.header = std::move(fields);
      continue;
    }
    if (fields.size() != table.header.size()) {
      throw DataError(path.string() + ":" + std::to_string(line_number) +
                      ": expected " + std::to_string(table.header.size()) +
                      " fields, got " + std::to_string(fields.size()));
    }
    table.rows.push_back(std::move(fields));
    table.line_numbers.push_back(line_number);
  }
  if (table.header.empty()) {
    throw DataError(path.string() + ": missing header row");
  }
  return table;
}

double parse_double(const CsvTable& table, std::size_t row, std::size_t col) {
  const std::string& field = table.rows[row][col];
  try {
    std::size_t used = 0;
    const double v = std::stod(field, &used);
    if (used != field.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw DataError(table.path.string() + ":" +
                    std::to_string(table.line_numbers[row]) +
                    ": cannot parse '" + field + "' in column '" +
                    table.header[col] + "' as a number");
  }
}

std::int64_t parse_int(const CsvTable& table, std::size_t row, std::size_t col) {
  const std::string& field = table.rows[row][col];
  try {
    std::size_t used = 0;
    const long long v = std::stoll(field, &used);
    if (used != field.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw DataError(table.path.string() + ":" +
                    std::to_string(table.line_numbers[row]) +
                    ": cannot parse '" + field + "' in column '" +
                    table.header[col] + "' as an integer");
  }
}

std::string format_double(double value, int significant_digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", significant_digits, value);
  return buf;
}

}  // namespace threshtest
