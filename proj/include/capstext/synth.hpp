#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "capstext/corpus.hpp"

namespace capstext::datapipe {

// Desk-scale synthetic review corpus. Domain membership is signaled by
// domain-specific keywords, polarity by keywords shared across domains, so
// at noise_words_per_text == 0 both tasks are solvable exactly by keyword
// lookup.
struct SynthSpec {
  std::size_t num_domains = 4;
  std::size_t words_per_domain = 6;      // distinct keywords per domain
  std::size_t words_per_polarity = 6;    // distinct keywords per polarity
  std::size_t samples_per_cell = 25;     // per (domain, polarity) pair
  std::size_t domain_words_per_text = 4;
  std::size_t polarity_words_per_text = 4;
  std::size_t noise_words_per_text = 0;
  std::size_t noise_vocab = 8;
};

std::vector<std::string> synth_domain_names(std::size_t num_domains);
std::string synth_domain_keyword(std::size_t domain, std::size_t index);
std::string synth_polarity_keyword(Polarity p, std::size_t index);

std::vector<CorpusRecord> synth_corpus(const SynthSpec& spec, std::uint64_t seed);

}  // namespace capstext::datapipe
