#include "capstext/vocab.hpp"

#include <algorithm>

#include "capstext/error.hpp"

namespace capstext::encoder {

namespace {

const char* kSpecialNames[] = {"[CLS]", "[SEP]", "[PAD]", "[UNK]"};

bool is_special_name(std::string_view token) {
  for (const char* name : kSpecialNames) {
    if (token == name) return true;
  }
  return false;
}

}  // namespace

Vocabulary::Vocabulary() {
  for (const char* name : kSpecialNames) {
    index_.emplace(name, tokens_.size());
    tokens_.emplace_back(name);
  }
}

std::vector<std::string> split_tokens(std::string_view text) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= text.size(); ++i) {
    if (i == text.size() || text[i] == ' ' || text[i] == '\t') {
      if (i > start) out.emplace_back(text.substr(start, i - start));
      start = i + 1;
    }
  }
  return out;
}

Vocabulary Vocabulary::build(std::span<const std::string> texts,
                             std::size_t min_count) {
  if (texts.empty()) {
    throw InputError("build_vocab: empty corpus");
  }
  std::unordered_map<std::string, std::size_t> counts;
  for (const auto& text : texts) {
    for (auto& token : split_tokens(text)) {
      if (is_special_name(token)) continue;
      ++counts[token];
    }
  }
  std::vector<std::pair<std::string, std::size_t>> kept;
  kept.reserve(counts.size());
  for (auto& [token, count] : counts) {
    if (count >= min_count) kept.emplace_back(token, count);
  }
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });

  Vocabulary vocab;
  for (auto& [token, count] : kept) {
    vocab.index_.emplace(token, vocab.tokens_.size());
    vocab.tokens_.push_back(token);
  }
  return vocab;
}

Vocabulary Vocabulary::from_tokens(std::span<const std::string> tokens) {
  if (tokens.size() < kNumSpecials) {
    throw ParseError("vocabulary: token list lacks the reserved entries");
  }
  for (std::size_t i = 0; i < kNumSpecials; ++i) {
    if (tokens[i] != kSpecialNames[i]) {
      throw ParseError("vocabulary: reserved token " + std::to_string(i) +
                       " is '" + tokens[i] + "'");
    }
  }
  Vocabulary vocab;
  for (std::size_t i = kNumSpecials; i < tokens.size(); ++i) {
    if (!vocab.index_.emplace(tokens[i], vocab.tokens_.size()).second) {
      throw ParseError("vocabulary: duplicate token '" + tokens[i] + "'");
    }
    vocab.tokens_.push_back(tokens[i]);
  }
  return vocab;
}

std::size_t Vocabulary::id_of(std::string_view token) const {
  auto it = index_.find(std::string(token));
  if (it == index_.end()) return kUnk;
  return it->second;
}

const std::string& Vocabulary::token_of(std::size_t id) const {
  if (id >= tokens_.size()) {
    throw InputError("vocabulary: id " + std::to_string(id) + " out of range");
  }
  return tokens_[id];
}

TokenSequence tokenize(std::string_view normalized_text, const Vocabulary& vocab,
                       std::size_t max_seq_len) {
  if (max_seq_len < 2) {
    throw InputError("tokenize: max_seq_len must be at least 2");
  }
  TokenSequence seq;
  seq.ids.push_back(Vocabulary::kCls);
  const auto words = split_tokens(normalized_text);
  const std::size_t budget = max_seq_len - 2;
  for (std::size_t i = 0; i < words.size() && i < budget; ++i) {
    seq.ids.push_back(vocab.id_of(words[i]));
  }
  seq.ids.push_back(Vocabulary::kSep);
  return seq;
}

}  // namespace capstext::encoder
