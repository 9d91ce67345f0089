#include "mirrorqed/csv.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "mirrorqed/errors.hpp"

namespace mirrorqed::csv {

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) {
    const auto b = cell.find_first_not_of(" \t\r");
    const auto e = cell.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? std::string{} : cell.substr(b, e - b + 1));
  }
  return out;
}

double parse_double(const std::string& s, const std::string& path, std::size_t line_no) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError(path + ":" + std::to_string(line_no) + ": not a number: '" + s + "'");
  }
}

}  // namespace

std::size_t NumericTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  throw ConfigError("CSV has no column '" + name + "'");
}

NumericTable read_numeric(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  NumericTable t;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto cells = split(line);
    if (!have_header) {
      t.header = std::move(cells);
      have_header = true;
      continue;
    }
    if (cells.size() != t.header.size()) {
      throw ConfigError(path + ":" + std::to_string(line_no) + ": expected " +
                        std::to_string(t.header.size()) + " columns");
    }
    std::vector<double> row;
    row.reserve(cells.size());
    for (const auto& c : cells) row.push_back(parse_double(c, path, line_no));
    t.rows.push_back(std::move(row));
  }
  if (!have_header) throw ConfigError(path + ": missing header line");
  return t;
}

NumericTable read_numeric(const std::string& path, const std::vector<std::string>& expected) {
  NumericTable t = read_numeric(path);
  if (t.header != expected) {
    std::string want;
    for (const auto& h : expected) want += (want.empty() ? "" : ",") + h;
    throw ConfigError(path + ": header must be '" + want + "'");
  }
  return t;
}

std::string fmt(double value) {
  char buf[32];
  const int n = std::snprintf(buf, sizeof(buf), "%.17g", value);
  return std::string(buf, n > 0 ? static_cast<std::size_t>(n) : 0);
}

void write_row(std::ostream& os, const std::vector<std::string>& cells) {
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) os << ',';
    os << cells[i];
  }
  os << '\n';
}

void write_row(std::ostream& os, const std::vector<double>& cells) {
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) os << ',';
    os << fmt(cells[i]);
  }
  os << '\n';
}

}  // namespace mirrorqed::csv
