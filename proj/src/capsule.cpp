#include "capstext/capsule.hpp"

#include <cmath>

#include "capstext/error.hpp"

namespace capstext::capshead {

namespace {

constexpr double kProbClampLo = 1e-12;
constexpr double kProbClampHi = 1.0 - 1e-12;

double log_clamped_scalar(double x) {
  double c = x;
  if (c < kProbClampLo) c = kProbClampLo;
  if (c > kProbClampHi) c = kProbClampHi;
  return std::log(c);
}

}  // namespace

void CapsuleConfig::validate() const {
  if (hidden_dim == 0) {
    throw ConfigError("capsule: hidden_dim must be positive");
  }
  if (num_domains < 2) {
    throw ConfigError("capsule: need at least 2 domain capsules, got " +
                      std::to_string(num_domains));
  }
}

CapsuleParams CapsuleParams::init(const CapsuleConfig& config,
                                  numcore::RandomSource& rng) {
  config.validate();
  constexpr double kInitStd = 0.02;
  const auto make_capsule = [&]() {
    Capsule c;
    c.attention_w = Matrix(config.hidden_dim, 1, 0.0);
    c.prob_u = Matrix(config.hidden_dim, 1, 0.0);
    for (double& v : c.attention_w.values()) v = rng.next_normal(0.0, kInitStd);
    for (double& v : c.prob_u.values()) v = rng.next_normal(0.0, kInitStd);
    c.bias = Matrix(1, 1, 0.0);
    return c;
  };
  CapsuleParams params;
  params.sentiment[0] = make_capsule();
  params.sentiment[1] = make_capsule();
  params.domain.reserve(config.num_domains);
  for (std::size_t j = 0; j < config.num_domains; ++j) {
    params.domain.push_back(make_capsule());
  }
  return params;
}

void CapsuleParams::visit(const std::function<void(const std::string&, Matrix&)>& fn) {
  for (std::size_t i = 0; i < sentiment.size(); ++i) {
    const std::string prefix = "head.sentiment" + std::to_string(i) + ".";
    fn(prefix + "w", sentiment[i].attention_w);
    fn(prefix + "u", sentiment[i].prob_u);
    fn(prefix + "b", sentiment[i].bias);
  }
  for (std::size_t j = 0; j < domain.size(); ++j) {
    const std::string prefix = "head.domain" + std::to_string(j) + ".";
    fn(prefix + "w", domain[j].attention_w);
    fn(prefix + "u", domain[j].prob_u);
    fn(prefix + "b", domain[j].bias);
  }
}

void CapsuleParams::visit(
    const std::function<void(const std::string&, const Matrix&)>& fn) const {
  const_cast<CapsuleParams*>(this)->visit(
      [&fn](const std::string& name, Matrix& m) { fn(name, m); });
}

AttentionPooled attention_pool(const Matrix& hidden, std::span<const double> w) {
  if (w.size() != hidden.cols()) {
    throw ShapeError("attention_pool: weight length " + std::to_string(w.size()) +
                     " does not match hidden width " + std::to_string(hidden.cols()));
  }
  // Mirrors the tape path operation for operation so evaluation and training
  // see bit-identical numbers.
  const Matrix w_col = Matrix::column_vector(w);
  Matrix alpha_row = numcore::transpose(numcore::matmul(hidden, w_col));
  numcore::softmax_inplace({alpha_row.row_ptr(0), alpha_row.cols()});
  const Matrix pooled = numcore::matmul(alpha_row, hidden);

  AttentionPooled out;
  out.alpha.assign(alpha_row.values().begin(), alpha_row.values().end());
  out.pooled.assign(pooled.values().begin(), pooled.values().end());
  return out;
}

double sentiment_probability(std::span<const double> v, std::span<const double> u,
                             double bias) {
  if (v.size() != u.size()) {
    throw ShapeError("sentiment_probability: vector lengths differ (" +
                     std::to_string(v.size()) + " vs " + std::to_string(u.size()) +
                     ")");
  }
  const Matrix v_row = Matrix::row_vector(v);
  const Matrix u_col = Matrix::column_vector(u);
  const double logit = numcore::matmul(v_row, u_col)(0, 0) + bias;
  return numcore::sigmoid(logit);
}

std::vector<double> domain_probabilities(std::span<const double> logits) {
  if (logits.size() < 2) {
    throw ConfigError("domain_probabilities: need at least 2 capsule logits");
  }
  return numcore::softmax(logits);
}

std::vector<double> reconstruct(double p, std::span<const double> v) {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw InputError("reconstruct: probability outside [0,1]");
  }
  const Matrix scaled = numcore::scale(Matrix::row_vector(v), p);
  return scaled.values();
}

CapsuleForward forward(const Matrix& hidden, const CapsuleParams& params) {
  const std::size_t d = params.hidden_dim();
  if (hidden.cols() != d) {
    throw ShapeError("capsule forward: hidden width " +
                     std::to_string(hidden.cols()) + " does not match capsules (" +
                     std::to_string(d) + ")");
  }
  CapsuleForward fwd;
  fwd.instance_rep.assign(hidden.row_span(0).begin(), hidden.row_span(0).end());

  for (std::size_t i = 0; i < 2; ++i) {
    const Capsule& c = params.sentiment[i];
    AttentionPooled pooled = attention_pool(hidden, c.attention_w.values());
    fwd.sentiment_p[i] =
        sentiment_probability(pooled.pooled, c.prob_u.values(), c.bias(0, 0));
    fwd.sentiment_r.push_back(reconstruct(fwd.sentiment_p[i], pooled.pooled));
    fwd.sentiment_alpha.push_back(std::move(pooled.alpha));
    fwd.sentiment_v.push_back(std::move(pooled.pooled));
  }

  std::vector<double> logits;
  logits.reserve(params.domain.size());
  for (const Capsule& c : params.domain) {
    AttentionPooled pooled = attention_pool(hidden, c.attention_w.values());
    const Matrix v_row = Matrix::row_vector(pooled.pooled);
    const double logit = numcore::matmul(v_row, c.prob_u)(0, 0) + c.bias(0, 0);
    logits.push_back(logit);
    fwd.domain_alpha.push_back(std::move(pooled.alpha));
    fwd.domain_v.push_back(std::move(pooled.pooled));
  }
  fwd.domain_p = domain_probabilities(logits);
  for (std::size_t j = 0; j < fwd.domain_v.size(); ++j) {
    fwd.domain_r.push_back(reconstruct(fwd.domain_p[j], fwd.domain_v[j]));
  }
  return fwd;
}

Prediction predict(const CapsuleForward& fwd) {
  Prediction out;
  out.sentiment = (fwd.sentiment_p[1] > fwd.sentiment_p[0]) ? 1 : 0;
  std::size_t best = 0;
  for (std::size_t j = 1; j < fwd.domain_p.size(); ++j) {
    if (fwd.domain_p[j] > fwd.domain_p[best]) best = j;
  }
  out.domain = best;
  return out;
}

LossBreakdown loss(const CapsuleForward& fwd, std::size_t true_sentiment,
                   std::size_t true_domain, const LossWeights& weights) {
  if (true_sentiment > 1) {
    throw InputError("loss: sentiment label must be 0 or 1");
  }
  if (true_domain >= fwd.domain_p.size()) {
    throw InputError("loss: domain label " + std::to_string(true_domain) +
                     " outside K_d=" + std::to_string(fwd.domain_p.size()));
  }
  LossBreakdown out;
  // Mirrors head_loss_on_tape's operation order exactly.
  const double p_true = fwd.sentiment_p[true_sentiment];
  const double p_false = fwd.sentiment_p[1 - true_sentiment];
  const double class_weight = weights.sentiment_class_weight[true_sentiment];
  out.sentiment_bce =
      (log_clamped_scalar(p_true) + log_clamped_scalar(1.0 - p_false)) *
      (-class_weight);
  out.domain_ce = log_clamped_scalar(fwd.domain_p[true_domain]) * -1.0;

  double recon_sent = 0.0;
  for (std::size_t j = 0; j < fwd.instance_rep.size(); ++j) {
    const double diff = fwd.sentiment_r[true_sentiment][j] - fwd.instance_rep[j];
    recon_sent += diff * diff;
  }
  double recon_dom = 0.0;
  for (std::size_t j = 0; j < fwd.instance_rep.size(); ++j) {
    const double diff = fwd.domain_r[true_domain][j] - fwd.instance_rep[j];
    recon_dom += diff * diff;
  }
  out.recon = recon_sent + recon_dom;
  out.total = (out.sentiment_bce + out.domain_ce) + out.recon * weights.lambda_recon;
  return out;
}

CapsuleVars capsule_leaves(Tape& tape, const CapsuleParams& params) {
  CapsuleVars vars;
  const auto leaves = [&](const Capsule& c) {
    CapsuleVars::Caps v;
    v.w = tape.leaf(c.attention_w);
    v.u = tape.leaf(c.prob_u);
    v.b = tape.leaf(c.bias);
    return v;
  };
  vars.sentiment[0] = leaves(params.sentiment[0]);
  vars.sentiment[1] = leaves(params.sentiment[1]);
  vars.domain.reserve(params.domain.size());
  for (const Capsule& c : params.domain) {
    vars.domain.push_back(leaves(c));
  }
  return vars;
}

namespace {

struct PooledVars {
  Tape::Var alpha;   // 1 x positions
  Tape::Var pooled;  // 1 x d
};

PooledVars attention_pool_on_tape(Tape& tape, Tape::Var hidden, Tape::Var w) {
  PooledVars out;
  out.alpha = tape.row_softmax(tape.transpose(tape.matmul(hidden, w)));
  out.pooled = tape.matmul(out.alpha, hidden);
  return out;
}

Tape::Var capsule_logit(Tape& tape, Tape::Var pooled, const CapsuleVars::Caps& caps) {
  return tape.add(tape.matmul(pooled, caps.u), caps.b);
}

}  // namespace

HeadGraph head_loss_on_tape(Tape& tape, Tape::Var hidden, const CapsuleVars& vars,
                            std::size_t true_sentiment, std::size_t true_domain,
                            const LossWeights& weights) {
  if (true_sentiment > 1) {
    throw InputError("loss: sentiment label must be 0 or 1");
  }
  if (true_domain >= vars.domain.size()) {
    throw InputError("loss: domain label " + std::to_string(true_domain) +
                     " outside K_d=" + std::to_string(vars.domain.size()));
  }

  const Tape::Var instance_rep = tape.row(hidden, 0);

  std::array<Tape::Var, 2> sentiment_p;
  std::array<Tape::Var, 2> sentiment_v;
  for (std::size_t i = 0; i < 2; ++i) {
    PooledVars pooled = attention_pool_on_tape(tape, hidden, vars.sentiment[i].w);
    sentiment_v[i] = pooled.pooled;
    sentiment_p[i] = tape.sigmoid(capsule_logit(tape, pooled.pooled, vars.sentiment[i]));
  }

  std::vector<Tape::Var> domain_v(vars.domain.size());
  std::vector<Tape::Var> logits(vars.domain.size());
  for (std::size_t j = 0; j < vars.domain.size(); ++j) {
    PooledVars pooled = attention_pool_on_tape(tape, hidden, vars.domain[j].w);
    domain_v[j] = pooled.pooled;
    logits[j] = capsule_logit(tape, pooled.pooled, vars.domain[j]);
  }
  const Tape::Var domain_p = tape.row_softmax(tape.concat_cols(logits));

  // Sentiment BCE over both capsule activations.
  const Tape::Var one = tape.leaf(Matrix(1, 1, 1.0));
  const Tape::Var p_true = sentiment_p[true_sentiment];
  const Tape::Var p_false = sentiment_p[1 - true_sentiment];
  const Tape::Var bce = tape.scale(
      tape.add(tape.log_clamped(p_true, kProbClampLo, kProbClampHi),
               tape.log_clamped(tape.sub(one, p_false), kProbClampLo, kProbClampHi)),
      -weights.sentiment_class_weight[true_sentiment]);

  // Domain cross-entropy.
  const Tape::Var dce = tape.scale(
      tape.log_clamped(tape.element(domain_p, 0, true_domain), kProbClampLo,
                       kProbClampHi),
      -1.0);

  // Reconstruction of the ground-truth capsules toward the instance
  // representation.
  const Tape::Var r_sent =
      tape.scalar_mul(p_true, sentiment_v[true_sentiment]);
  const Tape::Var r_dom = tape.scalar_mul(tape.element(domain_p, 0, true_domain),
                                          domain_v[true_domain]);
  const auto squared_error = [&](Tape::Var r) {
    const Tape::Var diff = tape.sub(r, instance_rep);
    return tape.sum(tape.hadamard(diff, diff));
  };
  const Tape::Var recon = tape.add(squared_error(r_sent), squared_error(r_dom));

  HeadGraph graph;
  graph.loss = tape.add(tape.add(bce, dce), tape.scale(recon, weights.lambda_recon));
  graph.sentiment_p0 = sentiment_p[0];
  graph.sentiment_p1 = sentiment_p[1];
  graph.domain_p = domain_p;
  return graph;
}

}  // namespace capstext::capshead
