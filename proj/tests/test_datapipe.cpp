#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <map>
#include <set>
#include <string>

#include "capstext/corpus.hpp"
#include "capstext/error.hpp"
#include "capstext/normalize.hpp"
#include "capstext/random.hpp"
#include "capstext/split.hpp"
#include "capstext/synth.hpp"

using namespace capstext;
using namespace capstext::datapipe;

TEST_CASE("normalize removes URLs") {
  auto out = normalize("see http://x.y ok");
  REQUIRE(out.has_value());
  CHECK(*out == "see ok");

  CHECK(*normalize("go to www.example.com now") == "go to now");
  CHECK(*normalize("HTTPS://CAPS.example stays gone") == "stays gone");
  CHECK(*normalize("ftp://files.example fetch") == "fetch");
  // Not URLs: no scheme, no www. prefix.
  CHECK(*normalize("example.com stays") == "example.com stays");
  CHECK(*normalize("a:b stays") == "a:b stays");
}

TEST_CASE("normalize removes digits including Arabic-Indic") {
  CHECK(*normalize("غالی 100") == "غالی");
  // Arabic-Indic and Extended Arabic-Indic digits.
  CHECK(*normalize("abc ١٢٣ def") == "abc def");
  CHECK(*normalize("abc۱۲ def") == "abc def");
  CHECK(normalize("12345") == std::nullopt);
}

TEST_CASE("normalize removes emoji and drops empty results") {
  CHECK(normalize("\U0001F600\U0001F600") == std::nullopt);
  CHECK(*normalize("nice \U0001F600 product ❤️") == "nice product");
  CHECK(normalize("") == std::nullopt);
  CHECK(normalize("   \t\n ") == std::nullopt);
}

TEST_CASE("normalize collapses whitespace and trims") {
  CHECK(*normalize("  a \t b\n\nc  ") == "a b c");
}

TEST_CASE("normalize rejects invalid UTF-8") {
  std::string bad = "ok ";
  bad.push_back(static_cast<char>(0xFF));
  CHECK_THROWS_AS(normalize(bad), InputError);
  std::string truncated = "x";
  truncated.push_back(static_cast<char>(0xE2));
  CHECK_THROWS_AS(normalize(truncated), InputError);
}

TEST_CASE("normalize is idempotent on random mixed content") {
  numcore::RandomSource rng(424242);
  const std::vector<std::string> pieces = {
      "hello", "غالی", "123", "١٢",
      "http://a.b/c", "www.shop.ir", "\U0001F600", "❤️",
      " ", "  ", "\t", "x1y2", "WWW.Loud.com", "a-b_c", "\U0001F680\U0001F680",
      "خوب", "ftp://f.g", "w3c", ".", "::"};
  for (int trial = 0; trial < 1000; ++trial) {
    std::string s;
    const std::size_t n = 1 + rng.next_below(12);
    for (std::size_t i = 0; i < n; ++i) {
      s += pieces[rng.next_below(pieces.size())];
    }
    auto once = normalize(s);
    if (!once) continue;
    auto twice = normalize(*once);
    REQUIRE(twice.has_value());
    CHECK(*once == *twice);
  }
}

TEST_CASE("derive_polarity thresholds") {
  CHECK(derive_polarity(5) == Polarity::positive);
  CHECK(derive_polarity(4) == Polarity::positive);
  CHECK(derive_polarity(1) == Polarity::negative);
  CHECK(derive_polarity(3) == std::nullopt);
  CHECK(derive_polarity(2) == std::nullopt);
  CHECK_THROWS_AS(derive_polarity(0), InputError);
  CHECK_THROWS_AS(derive_polarity(6), InputError);
}

namespace {

const std::vector<std::string> kDomains = {"books", "phones"};

LoadedCorpus load(const std::string& csv, const LoadOptions& opts = {}) {
  return load_corpus_from_string(csv, kDomains, opts);
}

}  // namespace

TEST_CASE("load_corpus happy path") {
  auto loaded = load(
      "id,domain,score,text\n"
      "r1,books,5,great read\n"
      "r2,phones,1,broke fast\n"
      "r3,books,4,liked it\n");
  REQUIRE(loaded.records.size() == 3);
  CHECK(loaded.records[0].polarity == Polarity::positive);
  CHECK(loaded.records[1].polarity == Polarity::negative);
  CHECK(loaded.records[2].polarity == Polarity::positive);
  CHECK(loaded.summary.kept == 3);
  CHECK(loaded.summary.per_domain.at("books").positive == 2);
  CHECK(loaded.summary.per_domain.at("phones").negative == 1);
}

TEST_CASE("load_corpus rejects unknown domain with row line") {
  try {
    load(
        "id,domain,score,text\n"
        "r1,books,5,fine\n"
        "r2,cars,5,vroom\n");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("cars") != std::string::npos);
    CHECK(msg.find("3") != std::string::npos);
  }
}

TEST_CASE("load_corpus drops score 2-3 rows into the unlabeled tally") {
  auto loaded = load(
      "id,domain,score,text\n"
      "r1,books,3,meh\n"
      "r2,books,5,fine\n");
  CHECK(loaded.records.size() == 1);
  CHECK(loaded.summary.dropped_unlabeled == 1);
  CHECK(loaded.summary.kept == 1);
}

TEST_CASE("load_corpus explicit polarity overrides score") {
  auto loaded = load(
      "id,domain,score,text,polarity\n"
      "r1,books,5,awful but scored high,negative\n"
      "r2,books,2,manual says positive,positive\n");
  REQUIRE(loaded.records.size() == 2);
  CHECK(loaded.records[0].polarity == Polarity::negative);
  CHECK(loaded.records[1].polarity == Polarity::positive);
}

TEST_CASE("load_corpus errors: duplicate id, missing column, bad rows") {
  CHECK_THROWS_AS(load("id,domain,score,text\nr1,books,5,a\nr1,books,4,b\n"),
                  ParseError);
  CHECK_THROWS_AS(load("id,domain,text\nr1,books,a\n"), ParseError);
  CHECK_THROWS_AS(load("id,domain,score,text\nr1,books,9,a\n"), InputError);
  CHECK_THROWS_AS(load("id,domain,score,text\nr1,books,,no score or label\n"),
                  ParseError);
  std::string bad_utf8 = "id,domain,score,text\nr1,books,5,";
  bad_utf8.push_back(static_cast<char>(0xC0));
  bad_utf8 += "\n";
  CHECK_THROWS_AS(load(bad_utf8), InputError);
}

TEST_CASE("load_corpus drops emoji-only text into empty tally") {
  auto loaded = load(
      "id,domain,score,text\n"
      "r1,books,5,\U0001F600\U0001F600\n"
      "r2,books,5,real words\n");
  CHECK(loaded.records.size() == 1);
  CHECK(loaded.summary.dropped_empty_text == 1);
}

TEST_CASE("label totals partition the normalized rows") {
  auto loaded = load(
      "id,domain,score,text\n"
      "r1,books,5,a\n"
      "r2,books,3,b\n"
      "r3,books,1,c\n"
      "r4,phones,2,d\n"
      "r5,phones,4,\U0001F600\n"
      "r6,phones,4,e\n");
  const auto& s = loaded.summary;
  CHECK(s.totals.positive + s.totals.negative + s.dropped_unlabeled ==
        s.input_rows - s.dropped_empty_text);
  CHECK(s.totals.positive == 2);
  CHECK(s.totals.negative == 1);
  CHECK(s.dropped_unlabeled == 2);
  CHECK(s.dropped_empty_text == 1);
}

TEST_CASE("load_corpus relaxed mode keeps unlabeled records") {
  LoadOptions opts;
  opts.require_labels = false;
  auto loaded = load(
      "id,domain,score,text\n"
      "r1,books,3,meh\n"
      "r2,books,,just words\n",
      opts);
  REQUIRE(loaded.records.size() == 2);
  CHECK(loaded.records[0].polarity == Polarity::undetermined);
  CHECK(loaded.records[1].polarity == Polarity::undetermined);
}

namespace {

std::vector<CorpusRecord> balanced_corpus(std::size_t per_cell) {
  std::vector<CorpusRecord> records;
  std::size_t counter = 0;
  for (const auto& domain : {"books", "phones"}) {
    for (Polarity p : {Polarity::positive, Polarity::negative}) {
      for (std::size_t i = 0; i < per_cell; ++i) {
        CorpusRecord r;
        r.id = "r" + std::to_string(counter++);
        r.domain = domain;
        r.polarity = p;
        r.text = "word";
        records.push_back(r);
      }
    }
  }
  return records;
}

}  // namespace

TEST_CASE("split: exact stratified 80/20 on a balanced corpus") {
  auto records = balanced_corpus(25);  // 100 records, 4 strata of 25
  auto result = split(records, 0.8, 7);
  CHECK(result.train.size() == 80);
  CHECK(result.test.size() == 20);

  std::map<std::pair<std::string, int>, std::size_t> train_strata, test_strata;
  for (const auto& r : result.train) {
    ++train_strata[{r.domain, static_cast<int>(r.polarity)}];
  }
  for (const auto& r : result.test) {
    ++test_strata[{r.domain, static_cast<int>(r.polarity)}];
  }
  for (const auto& [key, n] : train_strata) CHECK(n == 20);
  for (const auto& [key, n] : test_strata) CHECK(n == 5);
}

TEST_CASE("split: deterministic, disjoint, exhaustive") {
  auto records = balanced_corpus(13);
  auto a = split(records, 0.8, 99);
  auto b = split(records, 0.8, 99);
  REQUIRE(a.train.size() == b.train.size());
  for (std::size_t i = 0; i < a.train.size(); ++i) {
    CHECK(a.train[i].id == b.train[i].id);
  }

  std::set<std::string> seen;
  for (const auto& r : a.train) CHECK(seen.insert(r.id).second);
  for (const auto& r : a.test) CHECK(seen.insert(r.id).second);
  CHECK(seen.size() == records.size());

  auto c = split(records, 0.8, 100);
  bool differs = false;
  for (std::size_t i = 0; i < std::min(a.test.size(), c.test.size()); ++i) {
    if (a.test[i].id != c.test[i].id) differs = true;
  }
  CHECK((differs || a.test.size() != c.test.size()));
}

TEST_CASE("split: singleton stratum goes to train with a warning") {
  auto records = balanced_corpus(3);
  CorpusRecord lone;
  lone.id = "lone";
  lone.domain = "books";
  lone.polarity = Polarity::undetermined;  // its own stratum
  lone.text = "x";
  records.push_back(lone);
  auto result = split(records, 0.8, 1);
  CHECK(!result.warnings.empty());
  bool in_train = false;
  for (const auto& r : result.train) {
    if (r.id == "lone") in_train = true;
  }
  CHECK(in_train);
  CHECK_THROWS_AS(split(records, 0.0, 1), InputError);
  CHECK_THROWS_AS(split(records, 1.0, 1), InputError);
}

TEST_CASE("kfold_plan partitions into balanced strata") {
  auto records = balanced_corpus(25);  // 50 pos + 50 neg over 2 domains
  auto plan = kfold_plan(records, 5, 11);
  CHECK(plan.k == 5);
  CHECK(plan.assignment.size() == records.size());

  // Fold sizes per stratum differ by at most 1 (here exactly 5 each).
  std::map<std::pair<std::string, int>, std::map<std::size_t, std::size_t>> strata;
  std::map<std::size_t, std::size_t> fold_sizes;
  for (const auto& r : records) {
    const std::size_t f = plan.fold_of(r.id);
    CHECK(f < 5);
    ++strata[{r.domain, static_cast<int>(r.polarity)}][f];
    ++fold_sizes[f];
  }
  for (const auto& [key, folds] : strata) {
    REQUIRE(folds.size() == 5);
    for (const auto& [fold, n] : folds) CHECK(n == 5);
  }
  for (const auto& [fold, n] : fold_sizes) CHECK(n == 20);

  // Polarity balance within folds: 50 pos + 50 neg, k=5 -> 10 + 10 per fold.
  std::map<std::size_t, std::size_t> pos_per_fold;
  for (const auto& r : records) {
    if (r.polarity == Polarity::positive) ++pos_per_fold[plan.fold_of(r.id)];
  }
  for (const auto& [fold, n] : pos_per_fold) CHECK(n == 10);
}

TEST_CASE("kfold_plan small case and errors") {
  auto records = balanced_corpus(3);
  records.resize(10);
  auto plan = kfold_plan(records, 5, 3);
  std::map<std::size_t, std::size_t> sizes;
  for (const auto& r : records) ++sizes[plan.fold_of(r.id)];
  REQUIRE(sizes.size() == 5);
  for (const auto& [fold, n] : sizes) CHECK(n == 2);

  auto again = kfold_plan(records, 5, 3);
  CHECK(plan.assignment == again.assignment);

  CHECK_THROWS_AS(kfold_plan(records, 1, 3), InputError);
  CHECK_THROWS_AS(kfold_plan(records, 11, 3), InputError);
}

TEST_CASE("synth_corpus counts, balance and determinism") {
  SynthSpec spec;
  spec.num_domains = 4;
  spec.samples_per_cell = 25;
  auto records = synth_corpus(spec, 5);
  CHECK(records.size() == 200);

  std::map<std::string, std::size_t> per_domain;
  std::size_t positive = 0;
  for (const auto& r : records) {
    ++per_domain[r.domain];
    if (r.polarity == Polarity::positive) ++positive;
  }
  CHECK(per_domain.size() == 4);
  for (const auto& [d, n] : per_domain) CHECK(n == 50);
  CHECK(positive == 100);

  auto again = synth_corpus(spec, 5);
  REQUIRE(again.size() == records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    CHECK(records[i].text == again[i].text);
    CHECK(records[i].id == again[i].id);
  }
  auto other = synth_corpus(spec, 6);
  bool differs = false;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (records[i].text != other[i].text) differs = true;
  }
  CHECK(differs);
}

TEST_CASE("synth_corpus at noise 0 is solved exactly by keyword lookup") {
  SynthSpec spec;
  spec.num_domains = 4;
  spec.samples_per_cell = 25;
  spec.noise_words_per_text = 0;
  auto records = synth_corpus(spec, 17);
  const auto names = synth_domain_names(spec.num_domains);

  for (const auto& r : records) {
    std::map<std::string, int> domain_votes;
    int polarity_vote = 0;
    std::size_t start = 0;
    const std::string text = r.text + " ";
    for (std::size_t i = 0; i < text.size(); ++i) {
      if (text[i] != ' ') continue;
      const std::string word = text.substr(start, i - start);
      start = i + 1;
      for (std::size_t d = 0; d < spec.num_domains; ++d) {
        for (std::size_t w = 0; w < spec.words_per_domain; ++w) {
          if (word == synth_domain_keyword(d, w)) ++domain_votes[names[d]];
        }
      }
      for (std::size_t w = 0; w < spec.words_per_polarity; ++w) {
        if (word == synth_polarity_keyword(Polarity::positive, w)) ++polarity_vote;
        if (word == synth_polarity_keyword(Polarity::negative, w)) --polarity_vote;
      }
    }
    std::string best_domain;
    int best = -1;
    for (const auto& [d, n] : domain_votes) {
      if (n > best) {
        best = n;
        best_domain = d;
      }
    }
    CHECK(best_domain == r.domain);
    CHECK((polarity_vote > 0) == (r.polarity == Polarity::positive));
  }
}

TEST_CASE("corpus csv round trip") {
  SynthSpec spec;
  spec.num_domains = 2;
  spec.samples_per_cell = 5;
  auto records = synth_corpus(spec, 3);
  auto csv = corpus_to_csv(records);
  auto domains = synth_domain_names(2);
  auto loaded = load_corpus_from_string(csv, domains, {});
  REQUIRE(loaded.records.size() == records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    CHECK(loaded.records[i].id == records[i].id);
    CHECK(loaded.records[i].text == records[i].text);
    CHECK(loaded.records[i].polarity == records[i].polarity);
  }
}

TEST_CASE("csv quoting survives commas and quotes") {
  std::vector<CorpusRecord> records(1);
  records[0].id = "r1";
  records[0].domain = "books";
  records[0].score = 5;
  records[0].text = "said \"wow, nice\" twice";
  records[0].polarity = Polarity::positive;
  auto csv = corpus_to_csv(records);
  std::vector<std::string> domains{"books"};
  auto loaded = load_corpus_from_string(csv, domains, {});
  REQUIRE(loaded.records.size() == 1);
  CHECK(loaded.records[0].text == records[0].text);
}
