#pragma once

#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "zap/error.hpp"

namespace zap::csv {

// Plain comma-separated rows. No quoting: ids in this project never contain
// commas, and numeric cells never need it.
inline std::vector<std::string> split_row(std::string_view line) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    auto cell = line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start);
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.remove_suffix(1);
    while (!cell.empty() && cell.front() == ' ') cell.remove_prefix(1);
    cells.emplace_back(cell);
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return cells;
}

inline std::vector<std::vector<std::string>> read_rows(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path + "'");
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    rows.push_back(split_row(line));
  }
  return rows;
}

inline double parse_double(const std::string& cell, const std::string& where) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(cell, &used);
  } catch (const std::exception&) {
    throw ParseError("malformed number '" + cell + "' at " + where);
  }
  if (used != cell.size()) throw ParseError("malformed number '" + cell + "' at " + where);
  return v;
}

inline long long parse_int(const std::string& cell, const std::string& where) {
  std::size_t used = 0;
  long long v = 0;
  try {
    v = std::stoll(cell, &used);
  } catch (const std::exception&) {
    throw ParseError("malformed integer '" + cell + "' at " + where);
  }
  if (used != cell.size()) throw ParseError("malformed integer '" + cell + "' at " + where);
  return v;
}

// Fixed six-decimal rendering used by every text output.
inline std::string fixed6(double v) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(6);
  double r = std::round(v * 1e6) / 1e6;
  if (r == 0.0) r = 0.0;  // no "-0.000000"
  os << r;
  return os.str();
}

}  // namespace zap::csv
