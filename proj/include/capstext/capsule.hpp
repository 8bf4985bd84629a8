#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "capstext/matrix.hpp"
#include "capstext/random.hpp"
#include "capstext/tape.hpp"

namespace capstext::capshead {

using numcore::Matrix;
using numcore::Tape;

// One capsule = attention vector over token positions, probability vector
// and bias. Sentiment capsules are indexed 0 (positive) and 1 (negative);
// domain capsules follow the declared domain order.
struct Capsule {
  Matrix attention_w;  // d x 1
  Matrix prob_u;       // d x 1
  Matrix bias;         // 1 x 1
};

struct CapsuleConfig {
  std::size_t hidden_dim = 0;   // d, must equal the encoder output width
  std::size_t num_domains = 0;  // K_d >= 2

  void validate() const;
};

struct CapsuleParams {
  std::array<Capsule, 2> sentiment;
  std::vector<Capsule> domain;

  static CapsuleParams init(const CapsuleConfig& config, numcore::RandomSource& rng);

  void visit(const std::function<void(const std::string&, Matrix&)>& fn);
  void visit(const std::function<void(const std::string&, const Matrix&)>& fn) const;

  std::size_t hidden_dim() const { return sentiment[0].attention_w.rows(); }
  std::size_t num_domains() const { return domain.size(); }
};

// alpha = softmax(H * w) over token positions; pooled = alpha^T * H.
struct AttentionPooled {
  std::vector<double> alpha;
  std::vector<double> pooled;  // length d
};

AttentionPooled attention_pool(const Matrix& hidden, std::span<const double> w);

// sigmoid(u . v + b)
double sentiment_probability(std::span<const double> v, std::span<const double> u,
                             double bias);

// softmax across the per-domain capsule logits.
std::vector<double> domain_probabilities(std::span<const double> logits);

// r = p * v
std::vector<double> reconstruct(double p, std::span<const double> v);

struct CapsuleForward {
  std::vector<std::vector<double>> sentiment_alpha;  // 2 x positions
  std::vector<std::vector<double>> sentiment_v;      // 2 x d
  std::array<double, 2> sentiment_p{};
  std::vector<std::vector<double>> sentiment_r;      // 2 x d

  std::vector<std::vector<double>> domain_alpha;     // K_d x positions
  std::vector<std::vector<double>> domain_v;         // K_d x d
  std::vector<double> domain_p;                      // K_d
  std::vector<std::vector<double>> domain_r;         // K_d x d

  std::vector<double> instance_rep;                  // classification-token row
};

CapsuleForward forward(const Matrix& hidden, const CapsuleParams& params);

struct Prediction {
  std::size_t sentiment = 0;  // 0 positive, 1 negative
  std::size_t domain = 0;
};

// Argmax per task; ties break toward the lower capsule index.
Prediction predict(const CapsuleForward& fwd);

struct LossWeights {
  double lambda_recon = 0.1;
  std::array<double, 2> sentiment_class_weight{1.0, 1.0};
};

struct LossBreakdown {
  double total = 0.0;
  double sentiment_bce = 0.0;
  double domain_ce = 0.0;
  double recon = 0.0;  // unweighted squared-error sum
};

// Joint loss: per-capsule sigmoid BCE on the two sentiment activations,
// cross-entropy on the domain distribution, and lambda_r times the squared
// reconstruction error of the two ground-truth capsules against the
// classification-token representation.
LossBreakdown loss(const CapsuleForward& fwd, std::size_t true_sentiment,
                   std::size_t true_domain, const LossWeights& weights);

// --- training-path graph builders ------------------------------------------

struct CapsuleVars {
  struct Caps {
    Tape::Var w, u, b;
  };
  std::array<Caps, 2> sentiment;
  std::vector<Caps> domain;
};

CapsuleVars capsule_leaves(Tape& tape, const CapsuleParams& params);

struct HeadGraph {
  Tape::Var loss;
  Tape::Var sentiment_p0, sentiment_p1;
  Tape::Var domain_p;  // 1 x K_d
};

// Builds the full capsule head plus the loss on the tape; hidden may itself be
// the output of an encoder graph (joint training) or a constant leaf (frozen H).
HeadGraph head_loss_on_tape(Tape& tape, Tape::Var hidden, const CapsuleVars& vars,
                            std::size_t true_sentiment, std::size_t true_domain,
                            const LossWeights& weights);

}  // namespace capstext::capshead
