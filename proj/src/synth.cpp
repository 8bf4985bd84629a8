#include "capstext/synth.hpp"

#include "capstext/error.hpp"
#include "capstext/random.hpp"

namespace capstext::datapipe {

using numcore::RandomSource;

namespace {

// Keyword suffixes must survive normalization, so indices are spelled with
// letters rather than digits.
std::string letters(std::size_t n) {
  std::string out;
  do {
    out.insert(out.begin(), static_cast<char>('a' + n % 26));
    n /= 26;
  } while (n > 0);
  return out;
}

}  // namespace

std::vector<std::string> synth_domain_names(std::size_t num_domains) {
  std::vector<std::string> names;
  names.reserve(num_domains);
  for (std::size_t i = 0; i < num_domains; ++i) {
    names.push_back("dom" + letters(i));
  }
  return names;
}

std::string synth_domain_keyword(std::size_t domain, std::size_t index) {
  return "d" + letters(domain) + "x" + letters(index);
}

std::string synth_polarity_keyword(Polarity p, std::size_t index) {
  return (p == Polarity::positive ? "goodx" : "badx") + letters(index);
}

std::vector<CorpusRecord> synth_corpus(const SynthSpec& spec, std::uint64_t seed) {
  if (spec.num_domains < 2 || spec.words_per_domain == 0 ||
      spec.words_per_polarity == 0 || spec.samples_per_cell == 0 ||
      spec.domain_words_per_text == 0 || spec.polarity_words_per_text == 0) {
    throw InputError("synth_corpus: malformed spec");
  }
  const auto names = synth_domain_names(spec.num_domains);
  RandomSource rng(seed, 0x5EED'CAFE);

  std::vector<CorpusRecord> records;
  records.reserve(spec.num_domains * 2 * spec.samples_per_cell);
  std::size_t counter = 0;
  for (std::size_t d = 0; d < spec.num_domains; ++d) {
    for (Polarity p : {Polarity::positive, Polarity::negative}) {
      for (std::size_t s = 0; s < spec.samples_per_cell; ++s) {
        std::vector<std::string> words;
        for (std::size_t w = 0; w < spec.domain_words_per_text; ++w) {
          words.push_back(synth_domain_keyword(d, rng.next_below(spec.words_per_domain)));
        }
        for (std::size_t w = 0; w < spec.polarity_words_per_text; ++w) {
          words.push_back(synth_polarity_keyword(p, rng.next_below(spec.words_per_polarity)));
        }
        for (std::size_t w = 0; w < spec.noise_words_per_text; ++w) {
          words.push_back("fillx" + letters(rng.next_below(spec.noise_vocab)));
        }
        numcore::shuffle(words, rng);

        CorpusRecord record;
        record.id = "synth" + std::to_string(counter++);
        record.domain = names[d];
        record.polarity = p;
        record.score = (p == Polarity::positive) ? 5 : 1;
        for (std::size_t w = 0; w < words.size(); ++w) {
          if (w) record.text.push_back(' ');
          record.text += words[w];
        }
        records.push_back(std::move(record));
      }
    }
  }
  return records;
}

}  // namespace capstext::datapipe
