#include "capstext/transformer.hpp"

#include <cmath>

#include "capstext/error.hpp"

namespace capstext::encoder {

void EncoderConfig::validate() const {
  if (hidden_dim == 0 || num_layers == 0 || num_heads == 0 || ff_dim == 0) {
    throw ConfigError("encoder: dimensions must be positive");
  }
  if (hidden_dim % num_heads != 0) {
    throw ConfigError("encoder: hidden_dim " + std::to_string(hidden_dim) +
                      " not divisible by num_heads " + std::to_string(num_heads));
  }
  if (max_seq_len < 2) {
    throw ConfigError("encoder: max_seq_len must be at least 2");
  }
  if (!(layer_norm_eps > 0.0)) {
    throw ConfigError("encoder: layer_norm_eps must be positive");
  }
}

namespace {

Matrix normal_matrix(std::size_t rows, std::size_t cols, numcore::RandomSource& rng,
                     double stddev) {
  Matrix m(rows, cols, 0.0);
  for (double& v : m.values()) v = rng.next_normal(0.0, stddev);
  return m;
}

}  // namespace

EncoderParams EncoderParams::init(const EncoderConfig& config, std::size_t vocab_size,
                                  numcore::RandomSource& rng) {
  config.validate();
  if (vocab_size < Vocabulary::kNumSpecials) {
    throw ConfigError("encoder: vocabulary too small");
  }
  constexpr double kInitStd = 0.02;
  const std::size_t d = config.hidden_dim;

  EncoderParams params;
  params.config = config;
  params.token_embedding = normal_matrix(vocab_size, d, rng, kInitStd);
  params.position_embedding = normal_matrix(config.max_seq_len, d, rng, kInitStd);
  for (std::size_t layer = 0; layer < config.num_layers; ++layer) {
    EncoderLayerParams lp;
    lp.wq = normal_matrix(d, d, rng, kInitStd);
    lp.wk = normal_matrix(d, d, rng, kInitStd);
    lp.wv = normal_matrix(d, d, rng, kInitStd);
    lp.wo = normal_matrix(d, d, rng, kInitStd);
    lp.ln1_scale = Matrix(1, d, 1.0);
    lp.ln1_offset = Matrix(1, d, 0.0);
    lp.ff_w1 = normal_matrix(d, config.ff_dim, rng, kInitStd);
    lp.ff_b1 = Matrix(1, config.ff_dim, 0.0);
    lp.ff_w2 = normal_matrix(config.ff_dim, d, rng, kInitStd);
    lp.ff_b2 = Matrix(1, d, 0.0);
    lp.ln2_scale = Matrix(1, d, 1.0);
    lp.ln2_offset = Matrix(1, d, 0.0);
    params.layers.push_back(std::move(lp));
  }
  return params;
}

void EncoderParams::visit(const std::function<void(const std::string&, Matrix&)>& fn) {
  fn("token_embedding", token_embedding);
  fn("position_embedding", position_embedding);
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const std::string prefix = "layer" + std::to_string(i) + ".";
    EncoderLayerParams& lp = layers[i];
    fn(prefix + "wq", lp.wq);
    fn(prefix + "wk", lp.wk);
    fn(prefix + "wv", lp.wv);
    fn(prefix + "wo", lp.wo);
    fn(prefix + "ln1_scale", lp.ln1_scale);
    fn(prefix + "ln1_offset", lp.ln1_offset);
    fn(prefix + "ff_w1", lp.ff_w1);
    fn(prefix + "ff_b1", lp.ff_b1);
    fn(prefix + "ff_w2", lp.ff_w2);
    fn(prefix + "ff_b2", lp.ff_b2);
    fn(prefix + "ln2_scale", lp.ln2_scale);
    fn(prefix + "ln2_offset", lp.ln2_offset);
  }
}

void EncoderParams::visit(
    const std::function<void(const std::string&, const Matrix&)>& fn) const {
  const_cast<EncoderParams*>(this)->visit(
      [&fn](const std::string& name, Matrix& m) { fn(name, m); });
}

EncoderVars encoder_leaves(Tape& tape, const EncoderParams& params) {
  EncoderVars vars;
  const_cast<EncoderParams&>(params).visit(
      [&](const std::string&, Matrix& m) { vars.vars.push_back(tape.leaf(m)); });
  return vars;
}

Tape::Var encode_on_tape(Tape& tape, const EncoderVars& vars,
                         const EncoderConfig& config,
                         std::span<const std::size_t> ids) {
  config.validate();
  if (ids.size() < 2 || ids.size() > config.max_seq_len) {
    throw InputError("encode: sequence length " + std::to_string(ids.size()) +
                     " outside [2, " + std::to_string(config.max_seq_len) + "]");
  }
  const std::size_t vocab_rows = tape.value(vars.vars[0]).rows();
  for (std::size_t id : ids) {
    if (id >= vocab_rows) {
      throw InputError("encode: token id " + std::to_string(id) +
                       " outside vocabulary of size " + std::to_string(vocab_rows));
    }
  }

  std::size_t cursor = 0;
  const auto next = [&]() { return vars.vars.at(cursor++); };

  const Tape::Var token_table = next();
  const Tape::Var position_table = next();

  std::vector<std::size_t> positions(ids.size());
  for (std::size_t i = 0; i < positions.size(); ++i) positions[i] = i;

  Tape::Var x = tape.add(tape.embedding(token_table, ids),
                         tape.embedding(position_table, positions));

  const std::size_t d = config.hidden_dim;
  const std::size_t head_dim = d / config.num_heads;
  const double attn_scale = 1.0 / std::sqrt(static_cast<double>(head_dim));

  for (std::size_t layer = 0; layer < config.num_layers; ++layer) {
    const Tape::Var wq = next(), wk = next(), wv = next(), wo = next();
    const Tape::Var ln1_scale = next(), ln1_offset = next();
    const Tape::Var ff_w1 = next(), ff_b1 = next(), ff_w2 = next(), ff_b2 = next();
    const Tape::Var ln2_scale = next(), ln2_offset = next();

    const Tape::Var q = tape.matmul(x, wq);
    const Tape::Var k = tape.matmul(x, wk);
    const Tape::Var v = tape.matmul(x, wv);

    std::vector<Tape::Var> heads;
    heads.reserve(config.num_heads);
    for (std::size_t h = 0; h < config.num_heads; ++h) {
      const std::size_t first = h * head_dim;
      const Tape::Var qh = tape.slice_cols(q, first, head_dim);
      const Tape::Var kh = tape.slice_cols(k, first, head_dim);
      const Tape::Var vh = tape.slice_cols(v, first, head_dim);
      const Tape::Var scores = tape.scale(tape.matmul(qh, tape.transpose(kh)),
                                          attn_scale);
      const Tape::Var attn = tape.row_softmax(scores);
      heads.push_back(tape.matmul(attn, vh));
    }
    const Tape::Var context = tape.concat_cols(heads);
    const Tape::Var attn_out = tape.matmul(context, wo);
    const Tape::Var x1 = tape.layer_norm(tape.add(x, attn_out), ln1_scale,
                                         ln1_offset, config.layer_norm_eps);

    const Tape::Var hidden =
        tape.relu(tape.add_row_broadcast(tape.matmul(x1, ff_w1), ff_b1));
    const Tape::Var ff_out = tape.add_row_broadcast(tape.matmul(hidden, ff_w2), ff_b2);
    x = tape.layer_norm(tape.add(x1, ff_out), ln2_scale, ln2_offset,
                        config.layer_norm_eps);
  }
  return x;
}

HiddenStates encode(const TokenSequence& seq, const EncoderParams& params) {
  Tape tape;
  EncoderVars vars = encoder_leaves(tape, params);
  const Tape::Var h = encode_on_tape(tape, vars, params.config, seq.ids);
  return tape.value(h);
}

}  // namespace capstext::encoder
