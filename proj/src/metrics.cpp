#include "capstext/metrics.hpp"

#include "capstext/error.hpp"

namespace capstext::evalkit {

std::size_t DomainConfusion::total() const {
  std::size_t n = 0;
  for (std::size_t c : counts) n += c;
  return n;
}

DomainConfusion& DomainConfusion::operator+=(const DomainConfusion& other) {
  if (num_classes != other.num_classes) {
    throw ShapeError("confusion: class count mismatch");
  }
  for (std::size_t i = 0; i < counts.size(); ++i) counts[i] += other.counts[i];
  return *this;
}

BinaryConfusion confusion(std::span<const std::size_t> predictions,
                          std::span<const std::size_t> truth,
                          std::size_t positive_class) {
  if (predictions.size() != truth.size()) {
    throw InputError("confusion: prediction and truth lengths differ (" +
                     std::to_string(predictions.size()) + " vs " +
                     std::to_string(truth.size()) + ")");
  }
  if (predictions.empty()) {
    throw InputError("confusion: empty input");
  }
  BinaryConfusion c;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const bool pred_pos = predictions[i] == positive_class;
    const bool true_pos = truth[i] == positive_class;
    if (pred_pos && true_pos) {
      ++c.tp;
    } else if (pred_pos && !true_pos) {
      ++c.fp;
    } else if (!pred_pos && true_pos) {
      ++c.fn;
    } else {
      ++c.tn;
    }
  }
  return c;
}

DomainConfusion confusion_matrix(std::span<const std::size_t> predictions,
                                 std::span<const std::size_t> truth,
                                 std::size_t num_classes) {
  if (predictions.size() != truth.size()) {
    throw InputError("confusion_matrix: prediction and truth lengths differ");
  }
  if (predictions.empty()) {
    throw InputError("confusion_matrix: empty input");
  }
  DomainConfusion c(num_classes);
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    if (predictions[i] >= num_classes || truth[i] >= num_classes) {
      throw InputError("confusion_matrix: label outside 0.." +
                       std::to_string(num_classes - 1));
    }
    ++c.at(truth[i], predictions[i]);
  }
  return c;
}

namespace {

struct Ratio {
  double value = 0.0;
  bool defined = false;
};

Ratio ratio(std::size_t numerator, std::size_t denominator) {
  if (denominator == 0) return {0.0, false};
  return {static_cast<double>(numerator) / static_cast<double>(denominator), true};
}

double harmonic_f1(double precision, double recall, bool* defined) {
  if (precision + recall <= 0.0) {
    *defined = false;
    return 0.0;
  }
  *defined = true;
  return 2.0 * precision * recall / (precision + recall);
}

}  // namespace

MetricSet metrics(const BinaryConfusion& c) {
  if (c.total() == 0) throw InputError("metrics: empty confusion counts");
  MetricSet m;
  m.accuracy = static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total());
  const Ratio p = ratio(c.tp, c.tp + c.fp);
  const Ratio r = ratio(c.tp, c.tp + c.fn);
  m.precision = p.value;
  m.precision_defined = p.defined;
  m.recall = r.value;
  m.recall_defined = r.defined;
  if (p.defined && r.defined) {
    m.f1 = harmonic_f1(m.precision, m.recall, &m.f1_defined);
  } else {
    m.f1 = 0.0;
    m.f1_defined = false;
  }
  return m;
}

MetricSet metrics(const DomainConfusion& c) {
  const std::size_t n = c.total();
  if (n == 0) throw InputError("metrics: empty confusion matrix");
  MetricSet m;
  std::size_t diagonal = 0;
  for (std::size_t k = 0; k < c.num_classes; ++k) diagonal += c.at(k, k);
  m.accuracy = static_cast<double>(diagonal) / static_cast<double>(n);

  // One-vs-rest macro averages; an undefined per-class ratio contributes 0
  // and clears the flag.
  double precision_sum = 0.0;
  double recall_sum = 0.0;
  bool precision_defined = true;
  bool recall_defined = true;
  for (std::size_t k = 0; k < c.num_classes; ++k) {
    std::size_t predicted = 0;
    std::size_t actual = 0;
    for (std::size_t j = 0; j < c.num_classes; ++j) {
      predicted += c.at(j, k);
      actual += c.at(k, j);
    }
    const Ratio p = ratio(c.at(k, k), predicted);
    const Ratio r = ratio(c.at(k, k), actual);
    precision_sum += p.value;
    recall_sum += r.value;
    precision_defined = precision_defined && p.defined;
    recall_defined = recall_defined && r.defined;
  }
  m.precision = precision_sum / static_cast<double>(c.num_classes);
  m.recall = recall_sum / static_cast<double>(c.num_classes);
  m.precision_defined = precision_defined;
  m.recall_defined = recall_defined;
  m.f1 = harmonic_f1(m.precision, m.recall, &m.f1_defined);
  return m;
}

}  // namespace capstext::evalkit
