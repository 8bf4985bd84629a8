#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "capstext/corpus.hpp"
#include "capstext/model.hpp"
#include "capstext/optimizer.hpp"

namespace capstext::trainer {

struct TrainConfig {
  std::size_t epochs = 30;
  std::size_t batch_size = 16;
  OptimizerConfig optimizer;  // adam(0.9, 0.999, 1e-8), lr 1e-3
  double lambda_recon = 0.1;
  std::uint64_t seed = 42;
  std::size_t early_stop_patience = 10;  // 0 disables early stopping
  // Inverse-frequency weights on the sentiment BCE; off by default.
  bool sentiment_class_weights = false;
  double validation_fraction = 0.1;
  std::size_t vocab_min_count = 1;
  std::size_t threads = 1;

  void validate() const;
};

struct EpochStats {
  std::size_t epoch = 0;  // 1-based
  double mean_loss = 0.0;
  double train_acc_sentiment = 0.0;
  double train_acc_domain = 0.0;
  // NaN when the validation split is empty.
  double val_acc_sentiment = 0.0;
  double val_acc_domain = 0.0;
};

using TrainHistory = std::vector<EpochStats>;

std::string history_to_csv(const TrainHistory& history);
void save_history_csv(const std::filesystem::path& path, const TrainHistory& history);

using HiddenStatesMap = std::map<std::string, Matrix>;  // record id -> H

struct TrainResult {
  Model model;
  TrainHistory history;
};

// Mini-batch training of encoder + capsule head on the joint loss. In
// precomputed mode every record id must resolve in hidden_states and only
// the head is trained. lambda_recon and seed come from the train config and
// are echoed into the returned model's config.
TrainResult train(std::span<const datapipe::CorpusRecord> dataset,
                  const ModelConfig& base_config, const TrainConfig& config,
                  const HiddenStatesMap* hidden_states = nullptr);

// One resolved training sample (tokens in toy mode, H otherwise).
struct SampleInput {
  TokenSequence seq;
  const Matrix* hidden = nullptr;
  std::size_t y_sentiment = 0;
  std::size_t y_domain = 0;
};

// Mean of per-sample gradients over the batch, flattened in parameter visit
// order; deterministic for any thread count.
std::vector<double> batch_gradient(const Model& model,
                                   std::span<const SampleInput> batch,
                                   const capshead::LossWeights& weights,
                                   std::size_t threads, double* mean_loss);

std::vector<double> flatten_params(const Model& model);
void unflatten_params(Model& model, std::span<const double> theta);

capshead::Prediction predict_record(const Model& model,
                                    const datapipe::CorpusRecord& record,
                                    const HiddenStatesMap* hidden_states = nullptr);

capshead::CapsuleForward forward_record(const Model& model,
                                        const datapipe::CorpusRecord& record,
                                        const HiddenStatesMap* hidden_states = nullptr);

}  // namespace capstext::trainer
