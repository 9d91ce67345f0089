#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace mirrorqed::csv {

/// Numeric table read from a CSV file: '#' lines are comments, the first
/// non-comment line is the header.
struct NumericTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  std::size_t column(const std::string& name) const;
};

NumericTable read_numeric(const std::string& path);
/// Same, but the header must equal `expected` exactly.
NumericTable read_numeric(const std::string& path, const std::vector<std::string>& expected);

/// Round-trip exact formatting (17 significant digits).
std::string fmt(double value);

void write_row(std::ostream& os, const std::vector<std::string>& cells);
void write_row(std::ostream& os, const std::vector<double>& cells);

}  // namespace mirrorqed::csv
