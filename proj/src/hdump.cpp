#include "capstext/hdump.hpp"

#include <cmath>
#include <sstream>

#include "capstext/error.hpp"
#include "capstext/fileio.hpp"

namespace capstext::encoder {

std::string hdump_to_string(std::span<const HdumpRecord> records) {
  if (records.empty()) throw InputError("hdump: no records");
  const std::size_t d = records[0].hidden.cols();
  std::string out = "HDUMP v1 " + std::to_string(records.size()) + " " +
                    std::to_string(d) + "\n";
  for (const auto& record : records) {
    if (record.hidden.cols() != d) {
      throw InputError("hdump: record '" + record.id + "' has width " +
                       std::to_string(record.hidden.cols()) + ", expected " +
                       std::to_string(d));
    }
    if (record.id.empty() ||
        record.id.find_first_of(" \t\r\n") != std::string::npos) {
      throw InputError("hdump: record id must be a non-empty token");
    }
    out += record.id + " " + std::to_string(record.hidden.rows()) + "\n";
    for (std::size_t i = 0; i < record.hidden.rows(); ++i) {
      for (std::size_t j = 0; j < d; ++j) {
        if (j) out.push_back(' ');
        out += format_double(record.hidden(i, j));
      }
      out.push_back('\n');
    }
  }
  return out;
}

void save_hidden_states(const std::filesystem::path& path,
                        std::span<const HdumpRecord> records) {
  write_text_file_atomic(path, hdump_to_string(records));
}

namespace {

struct LineReader {
  std::istringstream stream;
  std::size_t line_number = 0;

  explicit LineReader(const std::string& content) : stream(content) {}

  std::string next(const char* what) {
    std::string line;
    if (!std::getline(stream, line)) {
      throw ParseError("hdump: unexpected end of file at line " +
                       std::to_string(line_number + 1) + " while reading " + what);
    }
    ++line_number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
  }
};

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= line.size(); ++i) {
    if (i == line.size() || line[i] == ' ') {
      if (i > start) fields.push_back(line.substr(start, i - start));
      start = i + 1;
    }
  }
  return fields;
}

std::size_t parse_count(const std::string& field, std::size_t line,
                        const char* what) {
  try {
    std::size_t used = 0;
    const unsigned long long v = std::stoull(field, &used);
    if (used != field.size()) throw std::invalid_argument(field);
    return static_cast<std::size_t>(v);
  } catch (const std::exception&) {
    throw ParseError("hdump: bad " + std::string(what) + " '" + field +
                     "' at line " + std::to_string(line));
  }
}

}  // namespace

std::vector<HdumpRecord> hdump_from_string(const std::string& content) {
  LineReader reader(content);
  const std::string header = reader.next("header");
  auto fields = split_fields(header);
  if (fields.size() != 4 || fields[0] != "HDUMP" || fields[1] != "v1") {
    throw ParseError("hdump: bad header at line 1: '" + header + "'");
  }
  const std::size_t num_records = parse_count(fields[2], 1, "record count");
  const std::size_t d = parse_count(fields[3], 1, "hidden size");
  if (num_records == 0 || d == 0) {
    throw ParseError("hdump: header declares an empty dump");
  }

  std::vector<HdumpRecord> records;
  records.reserve(num_records);
  for (std::size_t r = 0; r < num_records; ++r) {
    const std::string meta = reader.next("record header");
    auto meta_fields = split_fields(meta);
    if (meta_fields.size() != 2) {
      throw ParseError("hdump: bad record header at line " +
                       std::to_string(reader.line_number));
    }
    const std::size_t length =
        parse_count(meta_fields[1], reader.line_number, "record length");
    if (length == 0) {
      throw ParseError("hdump: zero-length record at line " +
                       std::to_string(reader.line_number));
    }
    numcore::Matrix h(length, d, 0.0);
    for (std::size_t i = 0; i < length; ++i) {
      const std::string row = reader.next("hidden-state row");
      auto row_fields = split_fields(row);
      if (row_fields.size() != d) {
        throw ParseError("hdump: row at line " + std::to_string(reader.line_number) +
                         " has " + std::to_string(row_fields.size()) +
                         " values, expected " + std::to_string(d));
      }
      for (std::size_t j = 0; j < d; ++j) {
        const double v = parse_double(
            row_fields[j], "hdump line " + std::to_string(reader.line_number));
        if (!std::isfinite(v)) {
          throw ParseError("hdump: non-finite value at line " +
                           std::to_string(reader.line_number) + " column " +
                           std::to_string(j + 1));
        }
        h(i, j) = v;
      }
    }
    records.push_back(HdumpRecord{meta_fields[0], std::move(h)});
  }
  std::string trailing;
  while (std::getline(reader.stream, trailing)) {
    if (!trailing.empty() && trailing.back() == '\r') trailing.pop_back();
    if (!trailing.empty()) {
      throw ParseError("hdump: trailing content after declared records");
    }
  }
  return records;
}

std::vector<HdumpRecord> load_hidden_states(const std::filesystem::path& path) {
  return hdump_from_string(read_text_file(path));
}

}  // namespace capstext::encoder
