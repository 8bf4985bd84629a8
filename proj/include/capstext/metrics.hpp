#pragma once

#include <span>
#include <vector>

namespace capstext::evalkit {

struct BinaryConfusion {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::size_t tn = 0;

  std::size_t total() const { return tp + fp + fn + tn; }

  BinaryConfusion& operator+=(const BinaryConfusion& other) {
    tp += other.tp;
    fp += other.fp;
    fn += other.fn;
    tn += other.tn;
    return *this;
  }
};

// Rows are true classes, columns predicted.
struct DomainConfusion {
  std::size_t num_classes = 0;
  std::vector<std::size_t> counts;  // row-major num_classes x num_classes

  DomainConfusion() = default;
  explicit DomainConfusion(std::size_t k) : num_classes(k), counts(k * k, 0) {}

  std::size_t& at(std::size_t truth, std::size_t pred) {
    return counts[truth * num_classes + pred];
  }
  std::size_t at(std::size_t truth, std::size_t pred) const {
    return counts[truth * num_classes + pred];
  }
  std::size_t total() const;

  DomainConfusion& operator+=(const DomainConfusion& other);
};

BinaryConfusion confusion(std::span<const std::size_t> predictions,
                          std::span<const std::size_t> truth,
                          std::size_t positive_class);

DomainConfusion confusion_matrix(std::span<const std::size_t> predictions,
                                 std::span<const std::size_t> truth,
                                 std::size_t num_classes);

// Division-by-zero convention: an undefined ratio is reported as 0 with its
// defined-flag cleared; reports never carry NaN.
struct MetricSet {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  bool precision_defined = true;
  bool recall_defined = true;
  bool f1_defined = true;
};

MetricSet metrics(const BinaryConfusion& c);

// Macro-averaged one-vs-rest precision/recall over the classes; f1 is the
// harmonic mean of the macro precision and recall.
MetricSet metrics(const DomainConfusion& c);

}  // namespace capstext::evalkit
