#pragma once

#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace capstext::encoder {

// Whitespace-token vocabulary with the four reserved ids up front. Token
// ids are dense; ordering is by corpus frequency (descending) then
// lexicographic, so two builds over the same corpus are identical.
class Vocabulary {
 public:
  static constexpr std::size_t kCls = 0;
  static constexpr std::size_t kSep = 1;
  static constexpr std::size_t kPad = 2;
  static constexpr std::size_t kUnk = 3;
  static constexpr std::size_t kNumSpecials = 4;

  Vocabulary();

  static Vocabulary build(std::span<const std::string> texts, std::size_t min_count);

  // Specials-only vocabulary plus an explicit token list (checkpoint load).
  static Vocabulary from_tokens(std::span<const std::string> tokens);

  std::size_t id_of(std::string_view token) const;  // kUnk when absent
  const std::string& token_of(std::size_t id) const;
  std::size_t size() const { return tokens_.size(); }

  // All tokens in id order, specials included.
  const std::vector<std::string>& tokens() const { return tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::size_t> index_;
};

struct TokenSequence {
  std::vector<std::size_t> ids;  // [CLS] ... [SEP]
  std::size_t length() const { return ids.size(); }
};

// [CLS] + word ids (+UNK for out-of-vocabulary) + [SEP]; words beyond
// max_seq_len - 2 are truncated. Empty text yields [CLS][SEP].
TokenSequence tokenize(std::string_view normalized_text, const Vocabulary& vocab,
                       std::size_t max_seq_len);

std::vector<std::string> split_tokens(std::string_view text);

}  // namespace capstext::encoder
