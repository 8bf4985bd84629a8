#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "capstext/corpus.hpp"
#include "capstext/metrics.hpp"
#include "capstext/trainer.hpp"

namespace capstext::evalkit {

struct FoldSeries {
  std::vector<MetricSet> per_fold;
  MetricSet mean;
  MetricSet stddev;  // sample standard deviation (k-1)
};

FoldSeries aggregate_folds(std::span<const MetricSet> per_fold);

struct PerDomainAccuracy {
  std::string domain;
  double domain_accuracy = 0.0;     // recall of the domain class
  double sentiment_accuracy = 0.0;  // polarity accuracy within the domain
  std::size_t support = 0;
};

struct KfoldResult {
  std::size_t k = 0;
  FoldSeries sentiment;        // held-out fold metrics
  FoldSeries domain;
  FoldSeries train_sentiment;  // training-partition metrics per fold
  FoldSeries train_domain;
  BinaryConfusion sentiment_confusion;  // pooled held-out predictions
  DomainConfusion domain_confusion;
  std::vector<PerDomainAccuracy> per_domain;
  std::vector<double> fold_sentiment_accuracy;
  std::vector<double> fold_domain_accuracy;
};

// Trains on k-1 folds and evaluates on the held-out fold, for every fold.
// Fold assignment and per-fold training seeds derive from `seed`.
KfoldResult kfold_run(std::span<const datapipe::CorpusRecord> corpus, std::size_t k,
                      const trainer::ModelConfig& model_config,
                      const trainer::TrainConfig& train_config, std::uint64_t seed);

}  // namespace capstext::evalkit
