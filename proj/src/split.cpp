#include "capstext/split.hpp"

#include <algorithm>
#include <cmath>

#include "capstext/error.hpp"
#include "capstext/random.hpp"

namespace capstext::datapipe {

namespace {

using numcore::RandomSource;

// Strata keyed by (domain, polarity); indices ordered by record position so
// the result is independent of container iteration quirks.
std::map<std::pair<std::string, int>, std::vector<std::size_t>> build_strata(
    std::span<const CorpusRecord> records) {
  std::map<std::pair<std::string, int>, std::vector<std::size_t>> strata;
  for (std::size_t i = 0; i < records.size(); ++i) {
    strata[{records[i].domain, static_cast<int>(records[i].polarity)}].push_back(i);
  }
  return strata;
}

}  // namespace

SplitResult split(std::span<const CorpusRecord> records, double ratio,
                  std::uint64_t seed) {
  if (!(ratio > 0.0 && ratio < 1.0)) {
    throw InputError("split: ratio must be in (0,1)");
  }
  if (records.empty()) {
    throw InputError("split: empty record set");
  }
  auto strata = build_strata(records);

  SplitResult out;
  std::vector<bool> in_train(records.size(), false);
  std::size_t stratum_index = 0;
  for (auto& [key, indices] : strata) {
    RandomSource rng(seed, 0x5117'0000 + stratum_index++);
    numcore::shuffle(indices, rng);
    const std::size_t n = indices.size();
    if (n < 2) {
      out.warnings.push_back("stratum " + key.first + "/" +
                             polarity_name(static_cast<Polarity>(key.second)) +
                             " has fewer than 2 records; assigned to train");
      for (std::size_t idx : indices) in_train[idx] = true;
      continue;
    }
    std::size_t n_train = static_cast<std::size_t>(
        std::llround(ratio * static_cast<double>(n)));
    n_train = std::clamp<std::size_t>(n_train, 1, n - 1);
    for (std::size_t j = 0; j < n; ++j) {
      if (j < n_train) in_train[indices[j]] = true;
    }
  }
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (in_train[i]) {
      out.train.push_back(records[i]);
    } else {
      out.test.push_back(records[i]);
    }
  }
  return out;
}

std::size_t FoldPlan::fold_of(const std::string& id) const {
  auto it = assignment.find(id);
  if (it == assignment.end()) {
    throw InputError("fold plan: unknown record id '" + id + "'");
  }
  return it->second;
}

FoldPlan kfold_plan(std::span<const CorpusRecord> records, std::size_t k,
                    std::uint64_t seed) {
  if (k < 2) throw InputError("kfold: k must be at least 2");
  if (k > records.size()) {
    throw InputError("kfold: k=" + std::to_string(k) + " exceeds record count " +
                     std::to_string(records.size()));
  }
  auto strata = build_strata(records);

  FoldPlan plan;
  plan.k = k;
  std::size_t next_fold = 0;  // carried across strata to balance fold totals
  std::size_t stratum_index = 0;
  for (auto& [key, indices] : strata) {
    RandomSource rng(seed, 0xF01D'0000 + stratum_index++);
    numcore::shuffle(indices, rng);
    for (std::size_t idx : indices) {
      const auto [it, inserted] =
          plan.assignment.emplace(records[idx].id, next_fold);
      if (!inserted) {
        throw InputError("kfold: duplicate record id '" + records[idx].id + "'");
      }
      next_fold = (next_fold + 1) % k;
    }
  }
  return plan;
}

}  // namespace capstext::datapipe
