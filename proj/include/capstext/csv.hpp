#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace capstext::datapipe {

// RFC 4180 CSV. Quoted fields may contain commas, quotes ("" escape) and
// line breaks. Rows carry the 1-based line number of their first physical
// line for error reporting.

struct CsvRow {
  std::size_t line = 0;
  std::vector<std::string> fields;
};

struct CsvTable {
  CsvRow header;
  std::vector<CsvRow> rows;
};

CsvTable parse_csv(std::string_view content);

std::string csv_escape(std::string_view field);
std::string csv_join(const std::vector<std::string>& fields);

}  // namespace capstext::datapipe
