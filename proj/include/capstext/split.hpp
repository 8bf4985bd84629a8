#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "capstext/corpus.hpp"

namespace capstext::datapipe {

struct SplitResult {
  std::vector<CorpusRecord> train;
  std::vector<CorpusRecord> test;
  std::vector<std::string> warnings;  // singleton strata forced into train
};

// Stratified by polarity x domain; per-stratum counts are rounded so the
// overall train share tracks the requested ratio. Deterministic for a given
// (records, ratio, seed).
SplitResult split(std::span<const CorpusRecord> records, double ratio,
                  std::uint64_t seed);

struct FoldPlan {
  std::size_t k = 0;
  std::map<std::string, std::size_t> assignment;  // record id -> fold index

  std::size_t fold_of(const std::string& id) const;
};

// Stratified k-fold partition: within every polarity x domain stratum the
// fold sizes differ by at most one.
FoldPlan kfold_plan(std::span<const CorpusRecord> records, std::size_t k,
                    std::uint64_t seed);

}  // namespace capstext::datapipe
