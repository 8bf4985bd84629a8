#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <vector>

#include "capstext/error.hpp"
#include "capstext/model.hpp"
#include "capstext/optimizer.hpp"
#include "capstext/random.hpp"
#include "capstext/synth.hpp"
#include "capstext/trainer.hpp"

using namespace capstext;
using namespace capstext::trainer;
using capstext::datapipe::CorpusRecord;
using capstext::datapipe::Polarity;
using capstext::datapipe::SynthSpec;
using capstext::numcore::Matrix;
using capstext::numcore::RandomSource;
using capstext::numcore::Tape;

namespace {

ModelConfig tiny_model_config(std::size_t num_domains = 2, std::size_t d = 16) {
  ModelConfig config;
  config.mode = EncoderMode::toy;
  config.encoder.hidden_dim = d;
  config.encoder.num_layers = 1;
  config.encoder.num_heads = 2;
  config.encoder.ff_dim = 2 * d;
  config.encoder.max_seq_len = 16;
  config.domains = datapipe::synth_domain_names(num_domains);
  return config;
}

std::vector<CorpusRecord> tiny_separable_corpus(std::size_t per_cell,
                                                std::uint64_t seed) {
  SynthSpec spec;
  spec.num_domains = 2;
  spec.samples_per_cell = per_cell;
  spec.words_per_domain = 3;
  spec.words_per_polarity = 3;
  spec.domain_words_per_text = 3;
  spec.polarity_words_per_text = 3;
  return datapipe::synth_corpus(spec, seed);
}

}  // namespace

TEST_CASE("optimizer_step: sgd definition") {
  std::vector<double> theta{1.0};
  std::vector<double> grad{2.0};
  OptimizerState state;
  OptimizerConfig config;
  config.kind = OptimizerKind::sgd;
  config.learning_rate = 0.1;
  optimizer_step(theta, grad, state, config);
  CHECK(theta[0] == doctest::Approx(0.8).epsilon(1e-15));
}

TEST_CASE("optimizer_step: adam first step closed form") {
  std::vector<double> theta{0.0};
  std::vector<double> grad{1.0};
  OptimizerState state;
  OptimizerConfig config;  // adam defaults, lr 1e-3
  optimizer_step(theta, grad, state, config);
  CHECK(std::abs(theta[0] - (-0.001)) < 1e-6);
}

TEST_CASE("optimizer_step: zero gradient leaves parameters unchanged") {
  std::vector<double> theta{0.5, -0.25};
  std::vector<double> grad{0.0, 0.0};
  OptimizerState state;
  OptimizerConfig sgd;
  sgd.kind = OptimizerKind::sgd;
  optimizer_step(theta, grad, state, sgd);
  CHECK(theta[0] == 0.5);
  CHECK(theta[1] == -0.25);

  std::vector<double> bad{1.0};
  CHECK_THROWS_AS(optimizer_step(theta, bad, state, sgd), ShapeError);
}

TEST_CASE("train: zero learning rate leaves parameters unchanged") {
  auto records = tiny_separable_corpus(4, 1);
  TrainConfig config;
  config.epochs = 3;
  config.optimizer.learning_rate = 0.0;
  config.validation_fraction = 0.0;
  config.seed = 5;
  auto result = train(records, tiny_model_config(), config);

  Model fresh = Model::init(result.model.config, result.model.vocab);
  auto trained = flatten_params(result.model);
  auto initial = flatten_params(fresh);
  REQUIRE(trained.size() == initial.size());
  for (std::size_t i = 0; i < trained.size(); ++i) {
    CHECK(trained[i] == initial[i]);
  }
}

TEST_CASE("train: identical seeds give bitwise-identical checkpoints") {
  auto records = tiny_separable_corpus(4, 2);
  TrainConfig config;
  config.epochs = 3;
  config.seed = 99;
  config.validation_fraction = 0.0;
  auto a = train(records, tiny_model_config(), config);
  auto b = train(records, tiny_model_config(), config);
  CHECK(checkpoint_to_string(a.model) == checkpoint_to_string(b.model));
  CHECK(history_to_csv(a.history) == history_to_csv(b.history));

  TrainConfig other = config;
  other.seed = 100;
  auto c = train(records, tiny_model_config(), other);
  CHECK(checkpoint_to_string(a.model) != checkpoint_to_string(c.model));
}

TEST_CASE("train: gradients are independent of thread count") {
  auto records = tiny_separable_corpus(4, 3);
  TrainConfig config;
  config.epochs = 2;
  config.seed = 7;
  config.validation_fraction = 0.0;
  config.threads = 1;
  auto single = train(records, tiny_model_config(), config);
  config.threads = 4;
  auto multi = train(records, tiny_model_config(), config);
  CHECK(checkpoint_to_string(single.model) == checkpoint_to_string(multi.model));
}

TEST_CASE("train: 8-record separable set reaches accuracy 1.0 on both tasks") {
  auto records = tiny_separable_corpus(2, 4);  // 2 domains x 2 polarities x 2
  REQUIRE(records.size() == 8);
  TrainConfig config;
  config.epochs = 200;
  config.batch_size = 8;
  config.seed = 11;
  config.validation_fraction = 0.0;
  config.early_stop_patience = 0;
  auto result = train(records, tiny_model_config(), config);
  const auto& last = result.history.back();
  CHECK(last.train_acc_sentiment == 1.0);
  CHECK(last.train_acc_domain == 1.0);
}

TEST_CASE("train: mean epoch loss is non-increasing at small learning rates") {
  // Fixed 8-sample batch, SGD at 1e-3, 20 epochs, 20 seeded trials.
  int monotone = 0;
  for (std::uint64_t trial = 0; trial < 20; ++trial) {
    auto records = tiny_separable_corpus(2, 100 + trial);
    TrainConfig config;
    config.epochs = 20;
    config.batch_size = 8;
    config.optimizer.kind = OptimizerKind::sgd;
    config.optimizer.learning_rate = 1e-3;
    config.seed = 1000 + trial;
    config.validation_fraction = 0.0;
    config.early_stop_patience = 0;
    auto result = train(records, tiny_model_config(), config);
    bool ok = true;
    for (std::size_t e = 1; e < result.history.size(); ++e) {
      if (result.history[e].mean_loss > result.history[e - 1].mean_loss) ok = false;
    }
    if (ok) ++monotone;
  }
  CHECK(monotone >= 19);
}

TEST_CASE("batch gradient equals the gradient of the batch-mean loss") {
  auto records = tiny_separable_corpus(1, 8);
  records.resize(4);
  TrainConfig config;
  config.seed = 21;
  ModelConfig mc = tiny_model_config(2, 8);
  mc.encoder.num_heads = 2;

  std::vector<std::string> texts;
  for (const auto& r : records) texts.push_back(r.text);
  auto vocab = Vocabulary::build(texts, 1);
  mc.seed = 21;
  Model model = Model::init(mc, vocab);

  capshead::LossWeights weights;
  weights.lambda_recon = 0.1;

  std::vector<SampleInput> batch;
  for (const auto& r : records) {
    SampleInput s;
    s.seq = encoder::tokenize(r.text, vocab, mc.encoder.max_seq_len);
    s.y_sentiment = r.polarity == Polarity::positive ? 0 : 1;
    s.y_domain = mc.domain_index(r.domain);
    batch.push_back(s);
  }

  double mean_loss = 0.0;
  auto per_sample_mean = batch_gradient(model, batch, weights, 1, &mean_loss);

  // Single tape computing the mean of the four losses, sharing parameter
  // leaves across samples.
  Tape tape;
  auto enc_vars = encoder::encoder_leaves(tape, model.encoder);
  auto head_vars = capshead::capsule_leaves(tape, model.head);
  std::vector<Tape::Var> losses;
  for (const auto& s : batch) {
    auto hidden = encoder::encode_on_tape(tape, enc_vars, mc.encoder, s.seq.ids);
    auto graph = capshead::head_loss_on_tape(tape, hidden, head_vars, s.y_sentiment,
                                             s.y_domain, weights);
    losses.push_back(graph.loss);
  }
  auto total = tape.add(tape.add(losses[0], losses[1]),
                        tape.add(losses[2], losses[3]));
  auto mean = tape.scale(total, 0.25);
  tape.backward(mean);

  std::vector<double> combined;
  for (auto var : enc_vars.vars) {
    const Matrix& adj = tape.adjoint(var);
    combined.insert(combined.end(), adj.values().begin(), adj.values().end());
  }
  const auto append_caps = [&](const capshead::CapsuleVars::Caps& caps) {
    for (auto var : {caps.w, caps.u, caps.b}) {
      const Matrix& adj = tape.adjoint(var);
      combined.insert(combined.end(), adj.values().begin(), adj.values().end());
    }
  };
  for (const auto& caps : head_vars.sentiment) append_caps(caps);
  for (const auto& caps : head_vars.domain) append_caps(caps);

  REQUIRE(combined.size() == per_sample_mean.size());
  const double batch_mean_loss = tape.value(mean)(0, 0);
  CHECK(std::abs(batch_mean_loss - mean_loss) < 1e-12);
  for (std::size_t i = 0; i < combined.size(); ++i) {
    CHECK(std::abs(combined[i] - per_sample_mean[i]) <= 1e-10);
  }
}

TEST_CASE("checkpoint round trip reproduces predictions exactly") {
  auto records = tiny_separable_corpus(3, 12);
  TrainConfig config;
  config.epochs = 2;
  config.seed = 31;
  config.validation_fraction = 0.0;
  auto result = train(records, tiny_model_config(), config);

  const auto path = std::filesystem::temp_directory_path() /
                    ("capstext_ckpt_" + std::to_string(::getpid()) + ".txt");
  save_checkpoint(path, result.model);
  Model loaded = load_checkpoint(path);
  std::filesystem::remove(path);

  CHECK(loaded.config.lambda_recon == result.model.config.lambda_recon);
  CHECK(loaded.config.seed == result.model.config.seed);
  CHECK(loaded.config.domains == result.model.config.domains);
  CHECK(loaded.vocab.tokens() == result.model.vocab.tokens());

  auto before = flatten_params(result.model);
  auto after = flatten_params(loaded);
  REQUIRE(before.size() == after.size());
  for (std::size_t i = 0; i < before.size(); ++i) {
    CHECK(before[i] == after[i]);
  }

  // Identical predictions and probabilities on 100 random hidden inputs.
  RandomSource rng(5555);
  for (int trial = 0; trial < 100; ++trial) {
    Matrix h(3 + rng.next_below(5), result.model.config.hidden_dim(), 0.0);
    for (double& v : h.values()) v = rng.next_normal(0.0, 1.0);
    auto a = result.model.forward_hidden(h);
    auto b = loaded.forward_hidden(h);
    CHECK(a.sentiment_p[0] == b.sentiment_p[0]);
    CHECK(a.sentiment_p[1] == b.sentiment_p[1]);
    for (std::size_t j = 0; j < a.domain_p.size(); ++j) {
      CHECK(a.domain_p[j] == b.domain_p[j]);
    }
    auto pa = capshead::predict(a);
    auto pb = capshead::predict(b);
    CHECK(pa.sentiment == pb.sentiment);
    CHECK(pa.domain == pb.domain);
  }
}

TEST_CASE("checkpoint load rejects truncated and corrupt files") {
  auto records = tiny_separable_corpus(2, 13);
  TrainConfig config;
  config.epochs = 1;
  config.seed = 41;
  config.validation_fraction = 0.0;
  auto result = train(records, tiny_model_config(), config);
  const std::string full = checkpoint_to_string(result.model);

  for (double fraction : {0.1, 0.5, 0.9, 0.99}) {
    const std::string truncated =
        full.substr(0, static_cast<std::size_t>(full.size() * fraction));
    CHECK_THROWS_AS(checkpoint_from_string(truncated), ParseError);
  }
  CHECK_THROWS_AS(checkpoint_from_string("CAPSTEXT-CKPT v2\n"), ParseError);
  std::string corrupted = full;
  corrupted.replace(corrupted.find("tensor token_embedding"), 6, "tensox");
  CHECK_THROWS_AS(checkpoint_from_string(corrupted), ParseError);
}

TEST_CASE("train on precomputed hidden states") {
  // Records with fixed random H; polarity signaled by the first component.
  RandomSource rng(61);
  std::vector<CorpusRecord> records;
  HiddenStatesMap hmap;
  for (int i = 0; i < 40; ++i) {
    CorpusRecord r;
    r.id = "h" + std::to_string(i);
    r.domain = i % 2 == 0 ? "doma" : "domb";
    r.polarity = (i / 2) % 2 == 0 ? Polarity::positive : Polarity::negative;
    r.text = "unused";
    records.push_back(r);

    Matrix h(4, 8, 0.0);
    for (double& v : h.values()) v = rng.next_normal(0.0, 0.3);
    const double sent_signal = r.polarity == Polarity::positive ? 2.0 : -2.0;
    const double dom_signal = r.domain == "doma" ? 2.0 : -2.0;
    for (std::size_t row = 0; row < 4; ++row) {
      h(row, 0) = sent_signal + rng.next_normal(0.0, 0.1);
      h(row, 1) = dom_signal + rng.next_normal(0.0, 0.1);
    }
    hmap.emplace(r.id, std::move(h));
  }

  ModelConfig mc;
  mc.mode = EncoderMode::precomputed;
  mc.precomputed_dim = 8;
  mc.domains = {"doma", "domb"};

  TrainConfig config;
  config.epochs = 120;
  config.batch_size = 8;
  config.seed = 3;
  config.validation_fraction = 0.0;
  config.early_stop_patience = 0;
  auto result = train(records, mc, config, &hmap);
  CHECK(result.history.back().train_acc_sentiment == 1.0);
  CHECK(result.history.back().train_acc_domain == 1.0);

  // Missing H for a record id is an input error.
  CorpusRecord extra;
  extra.id = "missing";
  extra.domain = "doma";
  extra.polarity = Polarity::positive;
  extra.text = "x";
  records.push_back(extra);
  CHECK_THROWS_AS(train(records, mc, config, &hmap), InputError);
}

TEST_CASE("train input validation") {
  std::vector<CorpusRecord> empty;
  TrainConfig config;
  CHECK_THROWS_AS(train(empty, tiny_model_config(), config), InputError);

  auto records = tiny_separable_corpus(2, 14);
  records[0].polarity = Polarity::undetermined;
  CHECK_THROWS_AS(train(records, tiny_model_config(), config), InputError);

  TrainConfig bad = config;
  bad.epochs = 0;
  auto good_records = tiny_separable_corpus(2, 14);
  CHECK_THROWS_AS(train(good_records, tiny_model_config(), bad), ConfigError);
}

TEST_CASE("history csv layout") {
  TrainHistory history;
  EpochStats e;
  e.epoch = 1;
  e.mean_loss = 2.5;
  e.train_acc_sentiment = 0.75;
  e.train_acc_domain = 0.5;
  e.val_acc_sentiment = std::nan("");
  e.val_acc_domain = std::nan("");
  history.push_back(e);
  const std::string csv = history_to_csv(history);
  CHECK(csv.find("epoch,loss,train_acc_sent,train_acc_dom,val_acc_sent,val_acc_dom") ==
        0);
  CHECK(csv.find("1,2.5,0.75,0.5,nan,nan") != std::string::npos);
}

TEST_CASE("early stopping halts on plateaued validation accuracy") {
  auto records = tiny_separable_corpus(10, 15);  // 40 records
  TrainConfig config;
  config.epochs = 100;
  config.seed = 77;
  config.validation_fraction = 0.2;
  config.early_stop_patience = 3;
  auto result = train(records, tiny_model_config(), config);
  CHECK(result.history.size() < 100);
  CHECK(!std::isnan(result.history.back().val_acc_sentiment));
}
