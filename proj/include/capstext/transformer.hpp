#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "capstext/matrix.hpp"
#include "capstext/random.hpp"
#include "capstext/tape.hpp"
#include "capstext/vocab.hpp"

namespace capstext::encoder {

using numcore::Matrix;
using numcore::Tape;

// Per-token hidden state matrix, one row per sequence position. Row 0 is
// the classification-token vector, the last row the separator's.
using HiddenStates = Matrix;

struct EncoderConfig {
  std::size_t hidden_dim = 64;
  std::size_t num_layers = 2;
  std::size_t num_heads = 4;
  std::size_t ff_dim = 256;
  std::size_t max_seq_len = 64;
  double layer_norm_eps = 1e-12;

  void validate() const;
};

// Attention projections carry no biases: a key bias is annihilated by the
// row softmax and the others fold into later biases, so they would be
// unverifiable dead weight.
struct EncoderLayerParams {
  Matrix wq, wk, wv, wo;
  Matrix ln1_scale, ln1_offset;
  Matrix ff_w1, ff_b1, ff_w2, ff_b2;
  Matrix ln2_scale, ln2_offset;
};

struct EncoderParams {
  EncoderConfig config;
  Matrix token_embedding;     // vocab x d
  Matrix position_embedding;  // max_seq_len x d
  std::vector<EncoderLayerParams> layers;

  // Embeddings and projections from N(0, 0.02); layer-norm scale 1, offset 0.
  static EncoderParams init(const EncoderConfig& config, std::size_t vocab_size,
                            numcore::RandomSource& rng);

  // Fixed traversal order shared by the optimizer, checkpoints and
  // gradient flattening.
  void visit(const std::function<void(const std::string&, Matrix&)>& fn);
  void visit(const std::function<void(const std::string&, const Matrix&)>& fn) const;

  std::size_t vocab_size() const { return token_embedding.rows(); }
};

// Tape handles for every encoder tensor, in visit order.
struct EncoderVars {
  std::vector<Tape::Var> vars;
};

EncoderVars encoder_leaves(Tape& tape, const EncoderParams& params);

// Builds the full forward graph for one sequence and returns the final
// hidden-state node (length x d). Post-layer-norm residual blocks, ReLU
// feed-forward.
Tape::Var encode_on_tape(Tape& tape, const EncoderVars& vars,
                         const EncoderConfig& config,
                         std::span<const std::size_t> ids);

// Plain forward wrapper; deterministic for fixed (seq, params).
HiddenStates encode(const TokenSequence& seq, const EncoderParams& params);

}  // namespace capstext::encoder
