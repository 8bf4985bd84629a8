#include "capstext/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <thread>

#include "capstext/error.hpp"
#include "capstext/fileio.hpp"
#include "capstext/random.hpp"
#include "capstext/split.hpp"

namespace capstext::trainer {

using capshead::LossWeights;
using datapipe::CorpusRecord;
using datapipe::Polarity;
using numcore::RandomSource;
using numcore::Tape;

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("train: epochs must be at least 1");
  if (batch_size < 1) throw ConfigError("train: batch_size must be at least 1");
  if (!(optimizer.learning_rate >= 0.0)) {
    throw ConfigError("train: learning_rate must be non-negative");
  }
  if (!(lambda_recon >= 0.0)) {
    throw ConfigError("train: lambda_recon must be non-negative");
  }
  if (!(validation_fraction >= 0.0 && validation_fraction < 1.0)) {
    throw ConfigError("train: validation_fraction must be in [0,1)");
  }
}

std::string history_to_csv(const TrainHistory& history) {
  std::string out =
      "epoch,loss,train_acc_sent,train_acc_dom,val_acc_sent,val_acc_dom\n";
  const auto cell = [](double v) {
    return std::isnan(v) ? std::string("nan") : format_double(v);
  };
  for (const auto& e : history) {
    out += std::to_string(e.epoch) + "," + cell(e.mean_loss) + "," +
           cell(e.train_acc_sentiment) + "," + cell(e.train_acc_domain) + "," +
           cell(e.val_acc_sentiment) + "," + cell(e.val_acc_domain) + "\n";
  }
  return out;
}

void save_history_csv(const std::filesystem::path& path, const TrainHistory& history) {
  write_text_file_atomic(path, history_to_csv(history));
}

std::vector<double> flatten_params(const Model& model) {
  std::vector<double> theta;
  const auto append = [&](const std::string&, const Matrix& m) {
    theta.insert(theta.end(), m.values().begin(), m.values().end());
  };
  if (model.config.mode == EncoderMode::toy) {
    model.encoder.visit(append);
  }
  model.head.visit(append);
  return theta;
}

void unflatten_params(Model& model, std::span<const double> theta) {
  std::size_t cursor = 0;
  const auto scatter = [&](const std::string&, Matrix& m) {
    for (double& v : m.values()) v = theta[cursor++];
  };
  if (model.config.mode == EncoderMode::toy) {
    model.encoder.visit(scatter);
  }
  model.head.visit(scatter);
  if (cursor != theta.size()) {
    throw ShapeError("unflatten: parameter vector size mismatch");
  }
}

namespace {

struct SampleRun {
  double loss = 0.0;
  std::vector<double> grad;
};

SampleRun run_sample(const Model& model, const SampleInput& sample,
                     const LossWeights& weights) {
  Tape tape;
  std::vector<Tape::Var> trainable;
  Tape::Var hidden;

  if (model.config.mode == EncoderMode::toy) {
    encoder::EncoderVars enc_vars = encoder::encoder_leaves(tape, model.encoder);
    trainable = enc_vars.vars;
    hidden = encoder::encode_on_tape(tape, enc_vars, model.config.encoder,
                                     sample.seq.ids);
  } else {
    if (sample.hidden == nullptr) {
      throw ContractError("train: precomputed sample lacks hidden states");
    }
    hidden = tape.leaf(*sample.hidden);
  }

  capshead::CapsuleVars head_vars = capshead::capsule_leaves(tape, model.head);
  for (const auto& caps : head_vars.sentiment) {
    trainable.push_back(caps.w);
    trainable.push_back(caps.u);
    trainable.push_back(caps.b);
  }
  for (const auto& caps : head_vars.domain) {
    trainable.push_back(caps.w);
    trainable.push_back(caps.u);
    trainable.push_back(caps.b);
  }

  capshead::HeadGraph graph = capshead::head_loss_on_tape(
      tape, hidden, head_vars, sample.y_sentiment, sample.y_domain, weights);
  tape.backward(graph.loss);

  SampleRun run;
  run.loss = tape.value(graph.loss)(0, 0);
  for (Tape::Var var : trainable) {
    const Matrix& adj = tape.adjoint(var);
    run.grad.insert(run.grad.end(), adj.values().begin(), adj.values().end());
  }
  return run;
}

}  // namespace

std::vector<double> batch_gradient(const Model& model,
                                   std::span<const SampleInput> batch,
                                   const LossWeights& weights, std::size_t threads,
                                   double* mean_loss) {
  if (batch.empty()) throw InputError("batch_gradient: empty batch");
  std::vector<SampleRun> runs(batch.size());
  const std::size_t workers = std::max<std::size_t>(1, std::min(threads, batch.size()));
  if (workers == 1) {
    for (std::size_t i = 0; i < batch.size(); ++i) {
      runs[i] = run_sample(model, batch[i], weights);
    }
  } else {
    std::vector<std::thread> pool;
    std::exception_ptr failure;
    std::mutex failure_mutex;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w]() {
        try {
          for (std::size_t i = w; i < batch.size(); i += workers) {
            runs[i] = run_sample(model, batch[i], weights);
          }
        } catch (...) {
          std::lock_guard<std::mutex> lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      });
    }
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
  }

  // Fixed-order reduction keeps the result independent of thread count.
  std::vector<double> grad(runs[0].grad.size(), 0.0);
  double loss_sum = 0.0;
  for (const auto& run : runs) {
    if (run.grad.size() != grad.size()) {
      throw ContractError("batch_gradient: inconsistent gradient sizes");
    }
    for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += run.grad[i];
    loss_sum += run.loss;
  }
  const double inv = 1.0 / static_cast<double>(runs.size());
  for (double& g : grad) g *= inv;
  if (mean_loss) *mean_loss = loss_sum * inv;
  return grad;
}

capshead::CapsuleForward forward_record(const Model& model,
                                        const CorpusRecord& record,
                                        const HiddenStatesMap* hidden_states) {
  if (model.config.mode == EncoderMode::toy) {
    return model.forward_hidden(model.encode_text(record.text));
  }
  if (hidden_states == nullptr) {
    throw InputError("predict: precomputed mode needs hidden states");
  }
  auto it = hidden_states->find(record.id);
  if (it == hidden_states->end()) {
    throw InputError("predict: no hidden states for record id '" + record.id + "'");
  }
  return model.forward_hidden(it->second);
}

capshead::Prediction predict_record(const Model& model, const CorpusRecord& record,
                                    const HiddenStatesMap* hidden_states) {
  return capshead::predict(forward_record(model, record, hidden_states));
}

namespace {

struct ResolvedDataset {
  std::vector<SampleInput> samples;
  std::vector<const CorpusRecord*> records;
};

ResolvedDataset resolve(const Model& model,
                        std::span<const CorpusRecord> records,
                        const HiddenStatesMap* hidden_states) {
  ResolvedDataset out;
  out.samples.reserve(records.size());
  for (const auto& record : records) {
    SampleInput sample;
    if (record.polarity == Polarity::undetermined) {
      throw InputError("train: record '" + record.id + "' has no polarity label");
    }
    sample.y_sentiment = record.polarity == Polarity::positive ? 0 : 1;
    sample.y_domain = model.config.domain_index(record.domain);
    if (model.config.mode == EncoderMode::toy) {
      sample.seq = encoder::tokenize(record.text, model.vocab,
                                     model.config.encoder.max_seq_len);
    } else {
      auto it = hidden_states->find(record.id);
      if (it == hidden_states->end()) {
        throw InputError("train: no hidden states for record id '" + record.id +
                         "'");
      }
      if (it->second.cols() != model.config.hidden_dim()) {
        throw InputError("train: hidden states for '" + record.id + "' have width " +
                         std::to_string(it->second.cols()) + ", expected " +
                         std::to_string(model.config.hidden_dim()));
      }
      sample.hidden = &it->second;
    }
    out.samples.push_back(std::move(sample));
    out.records.push_back(&record);
  }
  return out;
}

struct AccuracyPair {
  double sentiment = std::nan("");
  double domain = std::nan("");
};

AccuracyPair accuracy_over(const Model& model,
                           const ResolvedDataset& data) {
  if (data.samples.empty()) return {};
  std::size_t sent_hits = 0;
  std::size_t dom_hits = 0;
  for (std::size_t i = 0; i < data.samples.size(); ++i) {
    const SampleInput& sample = data.samples[i];
    capshead::CapsuleForward fwd =
        model.config.mode == EncoderMode::toy
            ? model.forward_hidden(encoder::encode(sample.seq, model.encoder))
            : model.forward_hidden(*sample.hidden);
    const auto pred = capshead::predict(fwd);
    if (pred.sentiment == sample.y_sentiment) ++sent_hits;
    if (pred.domain == sample.y_domain) ++dom_hits;
  }
  AccuracyPair acc;
  acc.sentiment = static_cast<double>(sent_hits) /
                  static_cast<double>(data.samples.size());
  acc.domain = static_cast<double>(dom_hits) /
               static_cast<double>(data.samples.size());
  return acc;
}

}  // namespace

TrainResult train(std::span<const CorpusRecord> dataset,
                  const ModelConfig& base_config, const TrainConfig& config,
                  const HiddenStatesMap* hidden_states) {
  config.validate();
  if (dataset.empty()) throw InputError("train: empty dataset");

  ModelConfig model_config = base_config;
  model_config.lambda_recon = config.lambda_recon;
  model_config.seed = config.seed;
  model_config.validate();
  if (model_config.mode == EncoderMode::precomputed && hidden_states == nullptr) {
    throw InputError("train: precomputed mode needs hidden states");
  }

  // Validation split for early stopping (stratified, seeded).
  std::vector<CorpusRecord> core(dataset.begin(), dataset.end());
  std::vector<CorpusRecord> validation;
  if (config.validation_fraction > 0.0 && dataset.size() >= 2) {
    auto parts = datapipe::split(dataset, 1.0 - config.validation_fraction,
                                 config.seed ^ 0x76616c5f73656564ull);
    core = std::move(parts.train);
    validation = std::move(parts.test);
  }

  Vocabulary vocab;
  if (model_config.mode == EncoderMode::toy) {
    std::vector<std::string> texts;
    texts.reserve(dataset.size());
    for (const auto& r : dataset) texts.push_back(r.text);
    vocab = Vocabulary::build(texts, config.vocab_min_count);
  }

  Model model = Model::init(model_config, vocab);

  LossWeights weights;
  weights.lambda_recon = config.lambda_recon;
  if (config.sentiment_class_weights) {
    std::size_t positive = 0;
    for (const auto& r : core) {
      if (r.polarity == Polarity::positive) ++positive;
    }
    const std::size_t negative = core.size() - positive;
    if (positive > 0 && negative > 0) {
      const double n = static_cast<double>(core.size());
      weights.sentiment_class_weight[0] = n / (2.0 * static_cast<double>(positive));
      weights.sentiment_class_weight[1] = n / (2.0 * static_cast<double>(negative));
    }
  }

  ResolvedDataset train_data = resolve(model, core, hidden_states);
  ResolvedDataset val_data = resolve(model, validation, hidden_states);

  std::vector<double> theta = flatten_params(model);
  OptimizerState opt_state;

  TrainHistory history;
  double best_val_sentiment = -1.0;
  std::size_t epochs_since_improvement = 0;

  std::vector<std::size_t> order(train_data.samples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    RandomSource shuffle_rng(config.seed, 0xE70000ull + epoch);
    numcore::shuffle(order, shuffle_rng);

    double loss_sum = 0.0;
    std::size_t seen = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      std::vector<SampleInput> batch;
      batch.reserve(end - start);
      for (std::size_t i = start; i < end; ++i) {
        batch.push_back(train_data.samples[order[i]]);
      }
      double batch_loss = 0.0;
      std::vector<double> grad =
          batch_gradient(model, batch, weights, config.threads, &batch_loss);
      loss_sum += batch_loss * static_cast<double>(batch.size());
      seen += batch.size();
      optimizer_step(theta, grad, opt_state, config.optimizer);
      unflatten_params(model, theta);
    }

    EpochStats stats;
    stats.epoch = epoch;
    stats.mean_loss = loss_sum / static_cast<double>(std::max<std::size_t>(1, seen));
    const AccuracyPair train_acc = accuracy_over(model, train_data);
    stats.train_acc_sentiment = train_acc.sentiment;
    stats.train_acc_domain = train_acc.domain;
    const AccuracyPair val_acc = accuracy_over(model, val_data);
    stats.val_acc_sentiment = val_acc.sentiment;
    stats.val_acc_domain = val_acc.domain;
    history.push_back(stats);

    if (!val_data.samples.empty() && config.early_stop_patience > 0) {
      if (stats.val_acc_sentiment > best_val_sentiment) {
        best_val_sentiment = stats.val_acc_sentiment;
        epochs_since_improvement = 0;
      } else {
        ++epochs_since_improvement;
        if (epochs_since_improvement >= config.early_stop_patience) break;
      }
    }
  }

  return TrainResult{std::move(model), std::move(history)};
}

}  // namespace capstext::trainer
