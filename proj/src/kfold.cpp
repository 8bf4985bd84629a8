#include "capstext/kfold.hpp"

#include <cmath>
#include <functional>

#include "capstext/error.hpp"
#include "capstext/split.hpp"

namespace capstext::evalkit {

using datapipe::CorpusRecord;
using datapipe::Polarity;

namespace {

MetricSet field_map(const std::vector<MetricSet>& folds,
                    const std::function<double(double, std::size_t)>& finalize) {
  // finalize(sum-or-ss, count) applied per metric field.
  MetricSet out;
  const std::size_t k = folds.size();
  double acc = 0.0, prec = 0.0, rec = 0.0, f1 = 0.0;
  for (const auto& m : folds) {
    acc += m.accuracy;
    prec += m.precision;
    rec += m.recall;
    f1 += m.f1;
    out.precision_defined = out.precision_defined && m.precision_defined;
    out.recall_defined = out.recall_defined && m.recall_defined;
    out.f1_defined = out.f1_defined && m.f1_defined;
  }
  out.accuracy = finalize(acc, k);
  out.precision = finalize(prec, k);
  out.recall = finalize(rec, k);
  out.f1 = finalize(f1, k);
  return out;
}

}  // namespace

FoldSeries aggregate_folds(std::span<const MetricSet> per_fold) {
  if (per_fold.empty()) throw InputError("aggregate_folds: no folds");
  FoldSeries out;
  out.per_fold.assign(per_fold.begin(), per_fold.end());
  const std::size_t k = per_fold.size();
  out.mean = field_map(out.per_fold, [](double sum, std::size_t n) {
    return sum / static_cast<double>(n);
  });
  if (k == 1) {
    out.stddev = MetricSet{};
    out.stddev.precision_defined = out.mean.precision_defined;
    out.stddev.recall_defined = out.mean.recall_defined;
    out.stddev.f1_defined = out.mean.f1_defined;
    return out;
  }
  const auto sample_std = [&](auto field) {
    double ss = 0.0;
    const double mean = field(out.mean);
    for (const auto& m : out.per_fold) {
      const double d = field(m) - mean;
      ss += d * d;
    }
    return std::sqrt(ss / static_cast<double>(k - 1));
  };
  out.stddev.accuracy = sample_std([](const MetricSet& m) { return m.accuracy; });
  out.stddev.precision = sample_std([](const MetricSet& m) { return m.precision; });
  out.stddev.recall = sample_std([](const MetricSet& m) { return m.recall; });
  out.stddev.f1 = sample_std([](const MetricSet& m) { return m.f1; });
  out.stddev.precision_defined = out.mean.precision_defined;
  out.stddev.recall_defined = out.mean.recall_defined;
  out.stddev.f1_defined = out.mean.f1_defined;
  return out;
}

KfoldResult kfold_run(std::span<const CorpusRecord> corpus, std::size_t k,
                      const trainer::ModelConfig& model_config,
                      const trainer::TrainConfig& train_config, std::uint64_t seed) {
  const datapipe::FoldPlan plan = datapipe::kfold_plan(corpus, k, seed);

  KfoldResult result;
  result.k = k;
  result.sentiment_confusion = BinaryConfusion{};
  result.domain_confusion = DomainConfusion(model_config.num_domains());

  std::vector<MetricSet> sent_folds, dom_folds, train_sent_folds, train_dom_folds;

  // Pooled per-domain tallies over all held-out predictions.
  std::vector<std::size_t> domain_support(model_config.num_domains(), 0);
  std::vector<std::size_t> domain_hits(model_config.num_domains(), 0);
  std::vector<std::size_t> sentiment_hits_by_domain(model_config.num_domains(), 0);

  for (std::size_t fold = 0; fold < k; ++fold) {
    std::vector<CorpusRecord> train_records;
    std::vector<CorpusRecord> test_records;
    for (const auto& record : corpus) {
      if (plan.fold_of(record.id) == fold) {
        test_records.push_back(record);
      } else {
        train_records.push_back(record);
      }
    }
    if (train_records.empty() || test_records.empty()) {
      throw InputError("kfold: fold " + std::to_string(fold) + " is degenerate");
    }

    trainer::TrainConfig fold_config = train_config;
    fold_config.seed = seed ^ (0xF01Dull + fold * 0x9E3779B97F4A7C15ull);
    auto trained = trainer::train(train_records, model_config, fold_config);

    const auto evaluate = [&](std::span<const CorpusRecord> records,
                              bool pool_confusions) {
      std::vector<std::size_t> sent_pred, sent_true, dom_pred, dom_true;
      sent_pred.reserve(records.size());
      for (const auto& record : records) {
        const auto pred = trainer::predict_record(trained.model, record);
        const std::size_t y_sent =
            record.polarity == Polarity::positive ? 0 : 1;
        const std::size_t y_dom = trained.model.config.domain_index(record.domain);
        sent_pred.push_back(pred.sentiment);
        sent_true.push_back(y_sent);
        dom_pred.push_back(pred.domain);
        dom_true.push_back(y_dom);
        if (pool_confusions) {
          ++domain_support[y_dom];
          if (pred.domain == y_dom) ++domain_hits[y_dom];
          if (pred.sentiment == y_sent) ++sentiment_hits_by_domain[y_dom];
        }
      }
      // Positive class is capsule index 0.
      const BinaryConfusion bc = confusion(sent_pred, sent_true, 0);
      const DomainConfusion dc =
          confusion_matrix(dom_pred, dom_true, model_config.num_domains());
      if (pool_confusions) {
        result.sentiment_confusion += bc;
        result.domain_confusion += dc;
      }
      return std::make_pair(metrics(bc), metrics(dc));
    };

    const auto [test_sent, test_dom] = evaluate(test_records, true);
    const auto [train_sent, train_dom] = evaluate(train_records, false);
    sent_folds.push_back(test_sent);
    dom_folds.push_back(test_dom);
    train_sent_folds.push_back(train_sent);
    train_dom_folds.push_back(train_dom);
    result.fold_sentiment_accuracy.push_back(test_sent.accuracy);
    result.fold_domain_accuracy.push_back(test_dom.accuracy);
  }

  result.sentiment = aggregate_folds(sent_folds);
  result.domain = aggregate_folds(dom_folds);
  result.train_sentiment = aggregate_folds(train_sent_folds);
  result.train_domain = aggregate_folds(train_dom_folds);

  result.per_domain.reserve(model_config.num_domains());
  for (std::size_t d = 0; d < model_config.num_domains(); ++d) {
    PerDomainAccuracy row;
    row.domain = model_config.domains[d];
    row.support = domain_support[d];
    if (domain_support[d] > 0) {
      row.domain_accuracy = static_cast<double>(domain_hits[d]) /
                            static_cast<double>(domain_support[d]);
      row.sentiment_accuracy = static_cast<double>(sentiment_hits_by_domain[d]) /
                               static_cast<double>(domain_support[d]);
    }
    result.per_domain.push_back(row);
  }
  return result;
}

}  // namespace capstext::evalkit
