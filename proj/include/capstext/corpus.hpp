#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace capstext::datapipe {

enum class Polarity { positive, negative, undetermined };

struct CorpusRecord {
  std::string id;
  std::string text;  // normalized
  std::optional<int> score;
  std::string domain;
  Polarity polarity = Polarity::undetermined;
};

// Score-to-label rule: 4 and 5 are positive, 1 is negative, 2 and 3 carry
// no label and the record is dropped (nullopt). Scores outside 1..5 are an
// input error.
std::optional<Polarity> derive_polarity(int score);

const char* polarity_name(Polarity p);

struct LabelCounts {
  std::size_t positive = 0;
  std::size_t negative = 0;
};

struct CorpusSummary {
  std::size_t input_rows = 0;
  std::size_t kept = 0;
  std::size_t dropped_empty_text = 0;  // nothing left after normalization
  std::size_t dropped_unlabeled = 0;   // score 2-3 with no explicit polarity
  std::map<std::string, LabelCounts> per_domain;
  LabelCounts totals;
};

struct LoadOptions {
  bool require_labels = true;   // drop/complain about unlabeled records
  bool require_domain = true;   // validate domain against the declared set
};

struct LoadedCorpus {
  std::vector<CorpusRecord> records;
  CorpusSummary summary;
};

// CSV columns: id,domain,score,text with an optional trailing polarity
// column ("positive"/"negative"). An explicit polarity overrides the score
// rule (labels may come from a manual pass). Normalization drops and
// unlabeled drops are tallied in the summary.
LoadedCorpus load_corpus(const std::filesystem::path& path,
                         std::span<const std::string> domain_set,
                         const LoadOptions& options = {});

LoadedCorpus load_corpus_from_string(const std::string& content,
                                     std::span<const std::string> domain_set,
                                     const LoadOptions& options = {});

// Serializes records back to the canonical CSV layout (id,domain,score,
// text,polarity).
std::string corpus_to_csv(std::span<const CorpusRecord> records);

// Distinct domains in first-seen order; used when no domain set is declared.
std::vector<std::string> collect_domains(const std::string& csv_content);

CorpusSummary summarize(std::span<const CorpusRecord> records);

}  // namespace capstext::datapipe
