#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "capstext/corpus.hpp"
#include "capstext/jsonvalue.hpp"
#include "capstext/kfold.hpp"
#include "capstext/metrics.hpp"
#include "capstext/stats.hpp"

namespace capstext::evalkit {

// Everything emit_report serializes. Optional sections are omitted from the
// CSV companions and serialized as empty objects in the JSON, so one schema
// covers single evaluations and k-fold runs.
struct ReportData {
  JsonValue config = JsonValue::object();  // resolved run configuration
  datapipe::CorpusSummary dataset_summary;

  std::optional<MetricSet> polarity_train;
  std::optional<MetricSet> polarity_test;
  std::optional<BinaryConfusion> polarity_confusion;

  std::optional<MetricSet> domain_train;
  std::optional<MetricSet> domain_test;
  std::optional<DomainConfusion> domain_confusion;
  std::vector<PerDomainAccuracy> per_domain;

  std::optional<FoldSeries> folds_polarity;
  std::optional<FoldSeries> folds_domain;

  std::optional<TTestMatrix> ttest_polarity;
  std::optional<TTestMatrix> ttest_domain;
};

JsonValue report_to_json(const ReportData& data);

// Writes report.json plus CSV companions into out_dir. Every file goes
// through write-then-rename and all content is rendered before the first
// write, so a failure never leaves a partial file.
std::vector<std::filesystem::path> emit_report(const ReportData& data,
                                               const std::filesystem::path& out_dir);

}  // namespace capstext::evalkit
