#include "capstext/report.hpp"

#include "capstext/csv.hpp"
#include "capstext/error.hpp"
#include "capstext/fileio.hpp"

namespace capstext::evalkit {

namespace {

JsonValue metricset_json(const MetricSet& m) {
  JsonValue v = JsonValue::object();
  v.set("accuracy", JsonValue::number(m.accuracy));
  v.set("precision", JsonValue::number(m.precision));
  v.set("recall", JsonValue::number(m.recall));
  v.set("f1", JsonValue::number(m.f1));
  v.set("precision_defined", JsonValue::boolean(m.precision_defined));
  v.set("recall_defined", JsonValue::boolean(m.recall_defined));
  v.set("f1_defined", JsonValue::boolean(m.f1_defined));
  return v;
}

JsonValue binary_confusion_json(const BinaryConfusion& c) {
  JsonValue v = JsonValue::object();
  v.set("tp", JsonValue::integer(static_cast<std::int64_t>(c.tp)));
  v.set("fp", JsonValue::integer(static_cast<std::int64_t>(c.fp)));
  v.set("fn", JsonValue::integer(static_cast<std::int64_t>(c.fn)));
  v.set("tn", JsonValue::integer(static_cast<std::int64_t>(c.tn)));
  return v;
}

JsonValue domain_confusion_json(const DomainConfusion& c) {
  JsonValue rows = JsonValue::array();
  for (std::size_t i = 0; i < c.num_classes; ++i) {
    JsonValue row = JsonValue::array();
    for (std::size_t j = 0; j < c.num_classes; ++j) {
      row.push(JsonValue::integer(static_cast<std::int64_t>(c.at(i, j))));
    }
    rows.push(std::move(row));
  }
  return rows;
}

JsonValue fold_series_json(const FoldSeries& series) {
  JsonValue v = JsonValue::object();
  JsonValue folds = JsonValue::array();
  for (const auto& m : series.per_fold) folds.push(metricset_json(m));
  v.set("series", std::move(folds));
  v.set("mean", metricset_json(series.mean));
  v.set("std", metricset_json(series.stddev));
  return v;
}

JsonValue ttest_json(const TTestMatrix& matrix) {
  JsonValue v = JsonValue::object();
  JsonValue labels = JsonValue::array();
  for (const auto& label : matrix.labels) labels.push(JsonValue::string(label));
  v.set("labels", std::move(labels));
  const auto matrix_json = [](const std::vector<std::vector<double>>& m) {
    JsonValue rows = JsonValue::array();
    for (const auto& row : m) {
      JsonValue r = JsonValue::array();
      for (double x : row) r.push(JsonValue::number(x));
      rows.push(std::move(r));
    }
    return rows;
  };
  v.set("t", matrix_json(matrix.t));
  v.set("p", matrix_json(matrix.p));
  return v;
}

JsonValue summary_json(const datapipe::CorpusSummary& s) {
  JsonValue v = JsonValue::object();
  v.set("input_rows", JsonValue::integer(static_cast<std::int64_t>(s.input_rows)));
  v.set("kept", JsonValue::integer(static_cast<std::int64_t>(s.kept)));
  v.set("dropped_empty_text",
        JsonValue::integer(static_cast<std::int64_t>(s.dropped_empty_text)));
  v.set("dropped_unlabeled",
        JsonValue::integer(static_cast<std::int64_t>(s.dropped_unlabeled)));
  JsonValue totals = JsonValue::object();
  totals.set("positive", JsonValue::integer(static_cast<std::int64_t>(s.totals.positive)));
  totals.set("negative", JsonValue::integer(static_cast<std::int64_t>(s.totals.negative)));
  v.set("totals", std::move(totals));
  JsonValue per_domain = JsonValue::object();
  for (const auto& [domain, counts] : s.per_domain) {
    JsonValue cell = JsonValue::object();
    cell.set("positive", JsonValue::integer(static_cast<std::int64_t>(counts.positive)));
    cell.set("negative", JsonValue::integer(static_cast<std::int64_t>(counts.negative)));
    per_domain.set(domain, std::move(cell));
  }
  v.set("per_domain", std::move(per_domain));
  return v;
}

std::string metric_cell(double v, bool defined) {
  return defined ? format_double(v) : format_double(0.0);
}

}  // namespace

JsonValue report_to_json(const ReportData& data) {
  JsonValue root = JsonValue::object();
  root.set("schema", JsonValue::string("capstext-report-v1"));
  JsonValue config = data.config;
  root.set("config", std::move(config));
  root.set("dataset_summary", summary_json(data.dataset_summary));

  JsonValue polarity = JsonValue::object();
  if (data.polarity_train) polarity.set("train", metricset_json(*data.polarity_train));
  if (data.polarity_test) polarity.set("test", metricset_json(*data.polarity_test));
  if (data.polarity_confusion) {
    polarity.set("confusion", binary_confusion_json(*data.polarity_confusion));
  }
  root.set("polarity", std::move(polarity));

  JsonValue domain = JsonValue::object();
  if (data.domain_test) domain.set("metrics", metricset_json(*data.domain_test));
  if (data.domain_train) {
    domain.set("train_metrics", metricset_json(*data.domain_train));
  }
  JsonValue per_domain = JsonValue::array();
  for (const auto& row : data.per_domain) {
    JsonValue r = JsonValue::object();
    r.set("domain", JsonValue::string(row.domain));
    r.set("accuracy", JsonValue::number(row.domain_accuracy));
    r.set("polarity_accuracy", JsonValue::number(row.sentiment_accuracy));
    r.set("support", JsonValue::integer(static_cast<std::int64_t>(row.support)));
    per_domain.push(std::move(r));
  }
  domain.set("per_domain_accuracy", std::move(per_domain));
  if (data.domain_confusion) {
    domain.set("confusion", domain_confusion_json(*data.domain_confusion));
  }
  root.set("domain", std::move(domain));

  JsonValue folds = JsonValue::object();
  if (data.folds_polarity) folds.set("polarity", fold_series_json(*data.folds_polarity));
  if (data.folds_domain) folds.set("domain", fold_series_json(*data.folds_domain));
  root.set("folds", std::move(folds));

  JsonValue ttest = JsonValue::object();
  if (data.ttest_polarity) ttest.set("polarity", ttest_json(*data.ttest_polarity));
  if (data.ttest_domain) ttest.set("domain", ttest_json(*data.ttest_domain));
  root.set("ttest", std::move(ttest));
  return root;
}

std::vector<std::filesystem::path> emit_report(const ReportData& data,
                                               const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) {
    throw IoError("emit_report: cannot create directory " + out_dir.string() +
                  ": " + ec.message());
  }

  // Render everything first; write nothing on a rendering failure.
  std::vector<std::pair<std::string, std::string>> files;
  files.emplace_back("report.json", report_to_json(data).dump(2));

  {
    std::string csv = "task,split,accuracy,precision,recall,f1\n";
    const auto row = [&](const char* task, const char* split, const MetricSet& m) {
      csv += std::string(task) + "," + split + "," + format_double(m.accuracy) + "," +
             metric_cell(m.precision, m.precision_defined) + "," +
             metric_cell(m.recall, m.recall_defined) + "," +
             metric_cell(m.f1, m.f1_defined) + "\n";
    };
    if (data.polarity_train) row("polarity", "train", *data.polarity_train);
    if (data.polarity_test) row("polarity", "test", *data.polarity_test);
    if (data.domain_train) row("domain", "train", *data.domain_train);
    if (data.domain_test) row("domain", "test", *data.domain_test);
    files.emplace_back("metrics.csv", std::move(csv));
  }

  if (!data.per_domain.empty()) {
    std::string csv = "domain,accuracy,polarity_accuracy,support\n";
    for (const auto& row : data.per_domain) {
      csv += datapipe::csv_escape(row.domain) + "," +
             format_double(row.domain_accuracy) + "," +
             format_double(row.sentiment_accuracy) + "," +
             std::to_string(row.support) + "\n";
    }
    files.emplace_back("per_domain_accuracy.csv", std::move(csv));
  }

  if (data.polarity_confusion) {
    const auto& c = *data.polarity_confusion;
    std::string csv = "tp,fp,fn,tn\n" + std::to_string(c.tp) + "," +
                      std::to_string(c.fp) + "," + std::to_string(c.fn) + "," +
                      std::to_string(c.tn) + "\n";
    files.emplace_back("confusion_polarity.csv", std::move(csv));
  }
  if (data.domain_confusion) {
    const auto& c = *data.domain_confusion;
    std::string csv;
    for (std::size_t i = 0; i < c.num_classes; ++i) {
      for (std::size_t j = 0; j < c.num_classes; ++j) {
        if (j) csv.push_back(',');
        csv += std::to_string(c.at(i, j));
      }
      csv.push_back('\n');
    }
    files.emplace_back("confusion_domain.csv", std::move(csv));
  }

  const auto fold_csv = [&](const FoldSeries& series) {
    std::string csv = "fold,accuracy,precision,recall,f1\n";
    for (std::size_t i = 0; i < series.per_fold.size(); ++i) {
      const auto& m = series.per_fold[i];
      csv += std::to_string(i) + "," + format_double(m.accuracy) + "," +
             metric_cell(m.precision, m.precision_defined) + "," +
             metric_cell(m.recall, m.recall_defined) + "," +
             metric_cell(m.f1, m.f1_defined) + "\n";
    }
    csv += "mean," + format_double(series.mean.accuracy) + "," +
           metric_cell(series.mean.precision, series.mean.precision_defined) + "," +
           metric_cell(series.mean.recall, series.mean.recall_defined) + "," +
           metric_cell(series.mean.f1, series.mean.f1_defined) + "\n";
    csv += "std," + format_double(series.stddev.accuracy) + "," +
           format_double(series.stddev.precision) + "," +
           format_double(series.stddev.recall) + "," +
           format_double(series.stddev.f1) + "\n";
    return csv;
  };
  if (data.folds_polarity) {
    files.emplace_back("folds_polarity.csv", fold_csv(*data.folds_polarity));
  }
  if (data.folds_domain) {
    files.emplace_back("folds_domain.csv", fold_csv(*data.folds_domain));
  }

  const auto ttest_csv = [&](const TTestMatrix& matrix) {
    std::string csv = "label";
    for (const auto& label : matrix.labels) csv += "," + datapipe::csv_escape(label);
    csv += "\n";
    for (std::size_t i = 0; i < matrix.labels.size(); ++i) {
      csv += datapipe::csv_escape(matrix.labels[i]);
      for (std::size_t j = 0; j < matrix.labels.size(); ++j) {
        csv += "," + format_double(matrix.t[i][j]) + "/" +
               format_double(matrix.p[i][j]);
      }
      csv += "\n";
    }
    return csv;
  };
  if (data.ttest_polarity) {
    files.emplace_back("ttest_polarity.csv", ttest_csv(*data.ttest_polarity));
  }
  if (data.ttest_domain) {
    files.emplace_back("ttest_domain.csv", ttest_csv(*data.ttest_domain));
  }

  std::vector<std::filesystem::path> written;
  written.reserve(files.size());
  for (const auto& [name, content] : files) {
    const auto path = out_dir / name;
    write_text_file_atomic(path, content);
    written.push_back(path);
  }
  return written;
}

}  // namespace capstext::evalkit
