#include "capstext/csv.hpp"

#include "capstext/error.hpp"

namespace capstext::datapipe {

CsvTable parse_csv(std::string_view content) {
  CsvTable table;
  std::vector<CsvRow> all_rows;
  CsvRow row;
  row.line = 1;
  std::string field;
  bool in_quotes = false;
  bool row_started = false;
  std::size_t line = 1;

  const auto end_field = [&]() {
    row.fields.push_back(field);
    field.clear();
  };
  const auto end_row = [&]() {
    end_field();
    all_rows.push_back(row);
    row = CsvRow{};
    row_started = false;
  };

  std::size_t i = 0;
  while (i < content.size()) {
    const char c = content[i];
    if (!row_started) {
      row.line = line;
      row_started = true;
    }
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < content.size() && content[i + 1] == '"') {
          field.push_back('"');
          i += 2;
          continue;
        }
        in_quotes = false;
        ++i;
        continue;
      }
      if (c == '\n') ++line;
      field.push_back(c);
      ++i;
      continue;
    }
    switch (c) {
      case '"':
        if (!field.empty()) {
          throw ParseError("csv: stray quote in unquoted field at line " +
                           std::to_string(line));
        }
        in_quotes = true;
        ++i;
        break;
      case ',':
        end_field();
        ++i;
        break;
      case '\r':
        if (i + 1 < content.size() && content[i + 1] == '\n') {
          end_row();
          ++line;
          i += 2;
        } else {
          end_row();
          ++line;
          ++i;
        }
        break;
      case '\n':
        end_row();
        ++line;
        ++i;
        break;
      default:
        field.push_back(c);
        ++i;
        break;
    }
  }
  if (in_quotes) {
    throw ParseError("csv: unterminated quoted field at end of input");
  }
  if (row_started || !field.empty()) {
    end_row();
  }

  if (all_rows.empty()) {
    throw ParseError("csv: empty input");
  }
  table.header = all_rows.front();
  table.rows.assign(all_rows.begin() + 1, all_rows.end());
  return table;
}

std::string csv_escape(std::string_view field) {
  const bool needs_quotes = field.find_first_of(",\"\r\n") != std::string_view::npos;
  if (!needs_quotes) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

std::string csv_join(const std::vector<std::string>& fields) {
  std::string out;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out.push_back(',');
    out += csv_escape(fields[i]);
  }
  out.push_back('\n');
  return out;
}

}  // namespace capstext::datapipe
