#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "capstext/capsule.hpp"
#include "capstext/corpus.hpp"
#include "capstext/transformer.hpp"
#include "capstext/vocab.hpp"

namespace capstext::trainer {

using capshead::CapsuleParams;
using encoder::EncoderConfig;
using encoder::EncoderParams;
using encoder::HiddenStates;
using encoder::TokenSequence;
using encoder::Vocabulary;
using numcore::Matrix;

enum class EncoderMode { toy, precomputed };

struct ModelConfig {
  EncoderMode mode = EncoderMode::toy;
  EncoderConfig encoder;             // toy mode
  std::size_t precomputed_dim = 0;   // hidden width when ingesting dumped H
  std::vector<std::string> domains;  // capsule order
  double lambda_recon = 0.1;
  std::uint64_t seed = 42;

  std::size_t hidden_dim() const {
    return mode == EncoderMode::toy ? encoder.hidden_dim : precomputed_dim;
  }
  std::size_t num_domains() const { return domains.size(); }
  std::size_t domain_index(const std::string& name) const;

  void validate() const;
};

struct Model {
  ModelConfig config;
  Vocabulary vocab;       // empty beyond specials in precomputed mode
  EncoderParams encoder;  // unused in precomputed mode
  CapsuleParams head;

  // Fresh seeded parameters (encoder stream 1, head stream 2).
  static Model init(const ModelConfig& config, const Vocabulary& vocab);

  HiddenStates encode_text(const std::string& normalized_text) const;
  capshead::CapsuleForward forward_hidden(const HiddenStates& hidden) const;
  capshead::Prediction predict_text(const std::string& normalized_text) const;
};

// Self-describing text checkpoint; save -> load is value-exact.
std::string checkpoint_to_string(const Model& model);
void save_checkpoint(const std::filesystem::path& path, const Model& model);
Model checkpoint_from_string(const std::string& content);
Model load_checkpoint(const std::filesystem::path& path);

}  // namespace capstext::trainer
