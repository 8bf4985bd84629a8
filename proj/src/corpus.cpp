#include "capstext/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "capstext/csv.hpp"
#include "capstext/error.hpp"
#include "capstext/normalize.hpp"

namespace capstext::datapipe {

std::optional<Polarity> derive_polarity(int score) {
  if (score < 1 || score > 5) {
    throw InputError("derive_polarity: score " + std::to_string(score) +
                     " outside 1..5");
  }
  if (score >= 4) return Polarity::positive;
  if (score < 2) return Polarity::negative;
  return std::nullopt;
}

const char* polarity_name(Polarity p) {
  switch (p) {
    case Polarity::positive: return "positive";
    case Polarity::negative: return "negative";
    default: return "undetermined";
  }
}

namespace {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot open file: " + path.string());
  }
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

int parse_score(const std::string& field, std::size_t line) {
  if (field.empty()) {
    throw ParseError("corpus: empty score at row line " + std::to_string(line));
  }
  std::size_t used = 0;
  int value = 0;
  try {
    value = std::stoi(field, &used);
  } catch (const std::exception&) {
    throw ParseError("corpus: bad score '" + field + "' at row line " +
                     std::to_string(line));
  }
  if (used != field.size()) {
    throw ParseError("corpus: bad score '" + field + "' at row line " +
                     std::to_string(line));
  }
  return value;
}

Polarity parse_polarity(const std::string& field, std::size_t line) {
  if (field == "positive") return Polarity::positive;
  if (field == "negative") return Polarity::negative;
  throw ParseError("corpus: bad polarity '" + field + "' at row line " +
                   std::to_string(line));
}

}  // namespace

CorpusSummary summarize(std::span<const CorpusRecord> records) {
  CorpusSummary s;
  s.kept = records.size();
  for (const auto& r : records) {
    auto& bucket = s.per_domain[r.domain];
    if (r.polarity == Polarity::positive) {
      ++bucket.positive;
      ++s.totals.positive;
    } else if (r.polarity == Polarity::negative) {
      ++bucket.negative;
      ++s.totals.negative;
    }
  }
  return s;
}

LoadedCorpus load_corpus_from_string(const std::string& content,
                                     std::span<const std::string> domain_set,
                                     const LoadOptions& options) {
  if (!is_valid_utf8(content)) {
    throw InputError("corpus: file is not valid UTF-8");
  }
  CsvTable table = parse_csv(content);

  const auto& header = table.header.fields;
  const auto column = [&](const std::string& name) -> std::optional<std::size_t> {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return i;
    }
    return std::nullopt;
  };
  const auto required_column = [&](const std::string& name) {
    auto idx = column(name);
    if (!idx) throw ParseError("corpus: missing column '" + name + "'");
    return *idx;
  };
  const std::size_t id_col = required_column("id");
  const std::size_t domain_col = required_column("domain");
  const std::size_t score_col = required_column("score");
  const std::size_t text_col = required_column("text");
  const auto polarity_col = column("polarity");

  std::set<std::string> declared(domain_set.begin(), domain_set.end());
  std::set<std::string> seen_ids;

  LoadedCorpus out;
  out.summary.input_rows = table.rows.size();

  for (const auto& row : table.rows) {
    const std::size_t line = row.line;
    if (row.fields.size() < header.size()) {
      throw ParseError("corpus: row at line " + std::to_string(line) + " has " +
                       std::to_string(row.fields.size()) + " fields, expected " +
                       std::to_string(header.size()));
    }
    CorpusRecord record;
    record.id = row.fields[id_col];
    if (record.id.empty()) {
      throw ParseError("corpus: empty id at row line " + std::to_string(line));
    }
    if (!seen_ids.insert(record.id).second) {
      throw ParseError("corpus: duplicate id '" + record.id + "' at row line " +
                       std::to_string(line));
    }
    record.domain = row.fields[domain_col];
    if (options.require_domain) {
      if (!declared.count(record.domain)) {
        throw ParseError("corpus: unknown domain '" + record.domain +
                         "' at row line " + std::to_string(line));
      }
    }

    auto cleaned = normalize(row.fields[text_col]);
    if (!cleaned) {
      ++out.summary.dropped_empty_text;
      continue;
    }
    record.text = std::move(*cleaned);

    const std::string& score_field = row.fields[score_col];
    if (!score_field.empty()) {
      record.score = parse_score(score_field, line);
    }

    bool labeled = false;
    if (polarity_col && !row.fields[*polarity_col].empty()) {
      // Manual labels take precedence over the score rule.
      record.polarity = parse_polarity(row.fields[*polarity_col], line);
      labeled = true;
    } else if (record.score) {
      auto derived = derive_polarity(*record.score);
      if (derived) {
        record.polarity = *derived;
        labeled = true;
      }
    }

    if (!labeled && options.require_labels) {
      if (!record.score && (!polarity_col || row.fields[*polarity_col].empty())) {
        throw ParseError("corpus: row at line " + std::to_string(line) +
                         " has neither score nor polarity");
      }
      ++out.summary.dropped_unlabeled;
      continue;
    }

    out.records.push_back(std::move(record));
  }

  CorpusSummary counts = summarize(out.records);
  out.summary.kept = counts.kept;
  out.summary.per_domain = std::move(counts.per_domain);
  out.summary.totals = counts.totals;
  return out;
}

LoadedCorpus load_corpus(const std::filesystem::path& path,
                         std::span<const std::string> domain_set,
                         const LoadOptions& options) {
  return load_corpus_from_string(read_file(path), domain_set, options);
}

std::string corpus_to_csv(std::span<const CorpusRecord> records) {
  std::string out = "id,domain,score,text,polarity\n";
  for (const auto& r : records) {
    std::vector<std::string> fields;
    fields.push_back(r.id);
    fields.push_back(r.domain);
    fields.push_back(r.score ? std::to_string(*r.score) : "");
    fields.push_back(r.text);
    fields.push_back(r.polarity == Polarity::undetermined ? ""
                                                          : polarity_name(r.polarity));
    out += csv_join(fields);
  }
  return out;
}

std::vector<std::string> collect_domains(const std::string& csv_content) {
  CsvTable table = parse_csv(csv_content);
  std::optional<std::size_t> domain_col;
  for (std::size_t i = 0; i < table.header.fields.size(); ++i) {
    if (table.header.fields[i] == "domain") domain_col = i;
  }
  if (!domain_col) throw ParseError("corpus: missing column 'domain'");
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (const auto& row : table.rows) {
    if (*domain_col >= row.fields.size()) continue;
    const std::string& d = row.fields[*domain_col];
    if (!d.empty() && seen.insert(d).second) out.push_back(d);
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace capstext::datapipe
