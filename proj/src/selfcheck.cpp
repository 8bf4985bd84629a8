#include "capstext/selfcheck.hpp"

#include <string>
#include <vector>

#include "capstext/error.hpp"
#include "capstext/gradcheck.hpp"
#include "capstext/model.hpp"
#include "capstext/random.hpp"
#include "capstext/trainer.hpp"

namespace capstext::selfcheck {

using numcore::Matrix;
using numcore::RandomSource;
using numcore::Tape;
using trainer::Model;
using trainer::ModelConfig;

namespace {

std::string letters(std::size_t n) {
  std::string out;
  do {
    out.insert(out.begin(), static_cast<char>('a' + n % 26));
    n /= 26;
  } while (n > 0);
  return out;
}

void redraw_parameters(Model& model, std::uint64_t seed, double stddev) {
  RandomSource rng(seed, 9000);
  const auto redraw = [&](const std::string& name, Matrix& m) {
    const bool is_scale = name.find("_scale") != std::string::npos;
    for (double& v : m.values()) {
      v = (is_scale ? 1.0 : 0.0) + rng.next_normal(0.0, stddev);
    }
  };
  model.encoder.visit(redraw);
  model.head.visit(redraw);
}

}  // namespace

GradCheckOutcome run_grad_check(const GradCheckSpec& spec) {
  if (spec.seq_len < 2 || spec.seq_len > spec.max_seq_len) {
    throw ConfigError("gradcheck: seq_len must be in [2, max_seq_len]");
  }

  ModelConfig config;
  config.mode = trainer::EncoderMode::toy;
  config.encoder.hidden_dim = spec.hidden_dim;
  config.encoder.num_layers = spec.num_layers;
  config.encoder.num_heads = spec.num_heads;
  config.encoder.ff_dim = spec.ff_dim;
  config.encoder.max_seq_len = spec.max_seq_len;
  config.seed = spec.seed;
  for (std::size_t d = 0; d < spec.num_domains; ++d) {
    config.domains.push_back("dom" + letters(d));
  }

  std::vector<std::string> vocab_texts;
  for (std::size_t w = 0; w < spec.vocab_words; ++w) {
    vocab_texts.push_back("w" + letters(w));
  }
  const auto vocab = encoder::Vocabulary::build(vocab_texts, 1);

  Model model = Model::init(config, vocab);
  redraw_parameters(model, spec.seed, spec.verification_std);

  RandomSource rng(spec.seed, 9100);
  std::vector<std::size_t> ids;
  ids.push_back(encoder::Vocabulary::kCls);
  for (std::size_t i = 0; i + 2 < spec.seq_len; ++i) {
    ids.push_back(encoder::Vocabulary::kNumSpecials + rng.next_below(spec.vocab_words));
  }
  ids.push_back(encoder::Vocabulary::kSep);

  const std::size_t y_sentiment = rng.next_below(2);
  const std::size_t y_domain = rng.next_below(spec.num_domains);
  capshead::LossWeights weights;
  weights.lambda_recon = 0.1;

  const auto run = [&](const Model& m, std::vector<double>* grad) {
    Tape tape;
    encoder::EncoderVars enc_vars = encoder::encoder_leaves(tape, m.encoder);
    const Tape::Var hidden =
        encoder::encode_on_tape(tape, enc_vars, m.config.encoder, ids);
    capshead::CapsuleVars head_vars = capshead::capsule_leaves(tape, m.head);
    const capshead::HeadGraph graph = capshead::head_loss_on_tape(
        tape, hidden, head_vars, y_sentiment, y_domain, weights);
    if (grad) {
      tape.backward(graph.loss);
      grad->clear();
      const auto append = [&](Tape::Var v) {
        const Matrix& adj = tape.adjoint(v);
        grad->insert(grad->end(), adj.values().begin(), adj.values().end());
      };
      for (Tape::Var v : enc_vars.vars) append(v);
      for (const auto& caps : head_vars.sentiment) {
        append(caps.w);
        append(caps.u);
        append(caps.b);
      }
      for (const auto& caps : head_vars.domain) {
        append(caps.w);
        append(caps.u);
        append(caps.b);
      }
    }
    return tape.value(graph.loss)(0, 0);
  };

  std::vector<double> theta = trainer::flatten_params(model);
  std::vector<double> analytic;
  run(model, &analytic);

  Model scratch = model;
  const auto f = [&](std::span<const double> th) {
    trainer::unflatten_params(scratch, th);
    return run(scratch, nullptr);
  };

  GradCheckOutcome outcome;
  outcome.num_parameters = theta.size();
  outcome.max_relative_error = numcore::grad_check(f, theta, analytic, spec.eps);
  return outcome;
}

}  // namespace capstext::selfcheck
