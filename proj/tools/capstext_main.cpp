// capstext: multi-task text classification with an attention-based capsule
// head over a pluggable sequence encoder. Batch CLI; every run is fully
// determined by (argv, input bytes, seed).

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "capstext/corpus.hpp"
#include "capstext/csv.hpp"
#include "capstext/error.hpp"
#include "capstext/fileio.hpp"
#include "capstext/hdump.hpp"
#include "capstext/jsonvalue.hpp"
#include "capstext/kfold.hpp"
#include "capstext/model.hpp"
#include "capstext/normalize.hpp"
#include "capstext/report.hpp"
#include "capstext/selfcheck.hpp"
#include "capstext/split.hpp"
#include "capstext/stats.hpp"
#include "capstext/trainer.hpp"

namespace fs = std::filesystem;
using capstext::JsonValue;
using capstext::format_double;
using capstext::read_text_file;
using capstext::write_text_file_atomic;
namespace datapipe = capstext::datapipe;
namespace evalkit = capstext::evalkit;
namespace trainer = capstext::trainer;
namespace encoder = capstext::encoder;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumeric = 3;

struct Options {
  // common
  std::string data_path;
  std::string checkpoint_path;
  std::string hdump_path;
  std::string out_dir;
  std::string config_file;
  std::vector<std::string> domains;
  std::uint64_t seed = 42;
  bool force = false;
  std::size_t threads = 1;

  // encoder architecture
  std::size_t hidden_dim = 64;
  std::size_t num_layers = 2;
  std::size_t num_heads = 4;
  std::size_t ff_dim = 256;
  std::size_t max_seq_len = 64;

  // training
  std::size_t epochs = 30;
  std::size_t batch_size = 16;
  double learning_rate = 1e-3;
  std::string optimizer = "adam";
  double lambda_recon = 0.1;
  std::size_t patience = 10;
  bool class_weights = false;
  double val_fraction = 0.1;
  std::size_t vocab_min_count = 1;
  double split_ratio = 0.8;

  // kfold
  std::size_t k = 5;
  std::vector<std::string> compare_reports;

  // gradcheck
  std::size_t gc_hidden_dim = 16;
  std::size_t gc_num_domains = 4;
  std::size_t gc_seq_len = 8;
  double gc_eps = 1e-5;
};

// ---------------------------------------------------------------------------
// plumbing

std::string iso_utc_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm_utc{};
  gmtime_r(&t, &tm_utc);
  char buffer[32];
  std::strftime(buffer, sizeof(buffer), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
  return buffer;
}

void prepare_out_dir(const std::string& out_dir, bool force) {
  if (out_dir.empty()) {
    throw capstext::UsageError("an output directory is required (--out)");
  }
  const fs::path dir(out_dir);
  if (fs::exists(dir)) {
    if (!fs::is_directory(dir)) {
      throw capstext::UsageError("output path exists and is not a directory: " +
                                 out_dir);
    }
    if (!fs::is_empty(dir) && !force) {
      throw capstext::UsageError("output directory is not empty: " + out_dir +
                                 " (use --force to overwrite)");
    }
    return;
  }
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) {
    throw capstext::IoError("cannot create output directory " + out_dir + ": " +
                            ec.message());
  }
}

void write_run_meta(const Options& opts, const std::vector<std::string>& argv) {
  JsonValue meta = JsonValue::object();
  meta.set("timestamp_utc", JsonValue::string(iso_utc_now()));
  JsonValue args = JsonValue::array();
  for (const auto& a : argv) args.push(JsonValue::string(a));
  meta.set("argv", std::move(args));
  write_text_file_atomic(fs::path(opts.out_dir) / "run_meta.json", meta.dump(2));
}

void write_resolved_config(const Options& opts, const JsonValue& config) {
  write_text_file_atomic(fs::path(opts.out_dir) / "resolved_config.json",
                         config.dump(2));
}

// Applies config-file values to options the command line left untouched.
class ConfigBinder {
 public:
  ConfigBinder(CLI::App* cmd, const std::string& config_file) : cmd_(cmd) {
    if (config_file.empty()) return;
    std::ifstream in(config_file);
    if (!in) {
      throw capstext::IoError("cannot open config file: " + config_file);
    }
    try {
      config_ = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw capstext::ParseError("config file " + config_file + ": " + e.what());
    }
    if (!config_.is_object()) {
      throw capstext::ParseError("config file " + config_file +
                                 ": top level must be an object");
    }
  }

  template <typename T>
  void fill(const std::string& flag, const std::string& key, T& target) {
    if (!config_.contains(key)) return;
    if (cmd_->count(flag) > 0) return;  // flags win
    try {
      target = config_.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
      throw capstext::ParseError("config key '" + key + "': " + e.what());
    }
  }

 private:
  CLI::App* cmd_;
  nlohmann::json config_ = nlohmann::json::object();
};

void apply_config_file(CLI::App* cmd, Options& opts) {
  ConfigBinder binder(cmd, opts.config_file);
  binder.fill("--seed", "seed", opts.seed);
  binder.fill("--threads", "threads", opts.threads);
  binder.fill("--domains", "domains", opts.domains);
  binder.fill("--d", "hidden_dim", opts.hidden_dim);
  binder.fill("--layers", "num_layers", opts.num_layers);
  binder.fill("--heads", "num_heads", opts.num_heads);
  binder.fill("--ff-dim", "ff_dim", opts.ff_dim);
  binder.fill("--max-seq-len", "max_seq_len", opts.max_seq_len);
  binder.fill("--epochs", "epochs", opts.epochs);
  binder.fill("--batch-size", "batch_size", opts.batch_size);
  binder.fill("--lr", "learning_rate", opts.learning_rate);
  binder.fill("--optimizer", "optimizer", opts.optimizer);
  binder.fill("--lambda-recon", "lambda_recon", opts.lambda_recon);
  binder.fill("--patience", "patience", opts.patience);
  binder.fill("--class-weights", "class_weights", opts.class_weights);
  binder.fill("--val-fraction", "val_fraction", opts.val_fraction);
  binder.fill("--vocab-min-count", "vocab_min_count", opts.vocab_min_count);
  binder.fill("--split-ratio", "split_ratio", opts.split_ratio);
  binder.fill("--k", "k", opts.k);
}

datapipe::LoadedCorpus load_data(const Options& opts, bool require_labels,
                                 bool require_domain,
                                 std::vector<std::string>* resolved_domains) {
  if (opts.data_path.empty()) {
    throw capstext::UsageError("an input corpus is required (--data)");
  }
  const std::string content = read_text_file(opts.data_path);
  std::vector<std::string> domains = opts.domains;
  if (domains.empty() && require_domain) {
    domains = datapipe::collect_domains(content);
  }
  datapipe::LoadOptions load_opts;
  load_opts.require_labels = require_labels;
  load_opts.require_domain = require_domain;
  auto loaded = datapipe::load_corpus_from_string(content, domains, load_opts);
  if (resolved_domains) *resolved_domains = domains;
  return loaded;
}

trainer::HiddenStatesMap load_hdump_map(const std::string& path, std::size_t* d) {
  trainer::HiddenStatesMap map;
  auto records = encoder::load_hidden_states(path);
  for (auto& record : records) {
    if (d) *d = record.hidden.cols();
    if (!map.emplace(record.id, std::move(record.hidden)).second) {
      throw capstext::ParseError("hdump: duplicate record id in " + path);
    }
  }
  return map;
}

JsonValue metrics_source_config(const Options& opts, const std::string& subcommand) {
  JsonValue config = JsonValue::object();
  config.set("subcommand", JsonValue::string(subcommand));
  config.set("data", JsonValue::string(opts.data_path));
  if (!opts.checkpoint_path.empty()) {
    config.set("checkpoint", JsonValue::string(opts.checkpoint_path));
  }
  if (!opts.hdump_path.empty()) {
    config.set("hdump", JsonValue::string(opts.hdump_path));
  }
  config.set("seed", JsonValue::integer(static_cast<std::int64_t>(opts.seed)));
  config.set("threads", JsonValue::integer(static_cast<std::int64_t>(opts.threads)));
  return config;
}

JsonValue train_config_json(const Options& opts,
                            const std::vector<std::string>& domains) {
  JsonValue j = JsonValue::object();
  JsonValue arch = JsonValue::object();
  arch.set("hidden_dim", JsonValue::integer(static_cast<std::int64_t>(opts.hidden_dim)));
  arch.set("num_layers", JsonValue::integer(static_cast<std::int64_t>(opts.num_layers)));
  arch.set("num_heads", JsonValue::integer(static_cast<std::int64_t>(opts.num_heads)));
  arch.set("ff_dim", JsonValue::integer(static_cast<std::int64_t>(opts.ff_dim)));
  arch.set("max_seq_len",
           JsonValue::integer(static_cast<std::int64_t>(opts.max_seq_len)));
  j.set("encoder", std::move(arch));
  j.set("epochs", JsonValue::integer(static_cast<std::int64_t>(opts.epochs)));
  j.set("batch_size", JsonValue::integer(static_cast<std::int64_t>(opts.batch_size)));
  j.set("learning_rate", JsonValue::number(opts.learning_rate));
  j.set("optimizer", JsonValue::string(opts.optimizer));
  j.set("lambda_recon", JsonValue::number(opts.lambda_recon));
  j.set("patience", JsonValue::integer(static_cast<std::int64_t>(opts.patience)));
  j.set("class_weights", JsonValue::boolean(opts.class_weights));
  j.set("val_fraction", JsonValue::number(opts.val_fraction));
  j.set("vocab_min_count",
        JsonValue::integer(static_cast<std::int64_t>(opts.vocab_min_count)));
  j.set("split_ratio", JsonValue::number(opts.split_ratio));
  JsonValue doms = JsonValue::array();
  for (const auto& d : domains) doms.push(JsonValue::string(d));
  j.set("domains", std::move(doms));
  return j;
}

trainer::TrainConfig make_train_config(const Options& opts) {
  trainer::TrainConfig config;
  config.epochs = opts.epochs;
  config.batch_size = opts.batch_size;
  config.optimizer.learning_rate = opts.learning_rate;
  if (opts.optimizer == "adam") {
    config.optimizer.kind = trainer::OptimizerKind::adam;
  } else if (opts.optimizer == "sgd") {
    config.optimizer.kind = trainer::OptimizerKind::sgd;
  } else {
    throw capstext::UsageError("unknown optimizer '" + opts.optimizer +
                               "' (expected sgd or adam)");
  }
  config.lambda_recon = opts.lambda_recon;
  config.seed = opts.seed;
  config.early_stop_patience = opts.patience;
  config.sentiment_class_weights = opts.class_weights;
  config.validation_fraction = opts.val_fraction;
  config.vocab_min_count = opts.vocab_min_count;
  config.threads = opts.threads;
  return config;
}

trainer::ModelConfig make_model_config(const Options& opts,
                                       const std::vector<std::string>& domains,
                                       std::size_t precomputed_dim) {
  trainer::ModelConfig config;
  if (precomputed_dim > 0) {
    config.mode = trainer::EncoderMode::precomputed;
    config.precomputed_dim = precomputed_dim;
  } else {
    config.mode = trainer::EncoderMode::toy;
    config.encoder.hidden_dim = opts.hidden_dim;
    config.encoder.num_layers = opts.num_layers;
    config.encoder.num_heads = opts.num_heads;
    config.encoder.ff_dim = opts.ff_dim;
    config.encoder.max_seq_len = opts.max_seq_len;
  }
  config.domains = domains;
  config.lambda_recon = opts.lambda_recon;
  config.seed = opts.seed;
  return config;
}

struct SplitOutcome {
  std::vector<datapipe::CorpusRecord> train;
  std::vector<datapipe::CorpusRecord> test;
};

SplitOutcome apply_split(const std::vector<datapipe::CorpusRecord>& records,
                         const Options& opts) {
  SplitOutcome out;
  if (opts.split_ratio >= 1.0) {
    out.train = records;
    return out;
  }
  auto parts = datapipe::split(records, opts.split_ratio, opts.seed);
  out.train = std::move(parts.train);
  out.test = std::move(parts.test);
  return out;
}

// ---------------------------------------------------------------------------
// subcommands

int cmd_preprocess(const Options& opts, const std::vector<std::string>& argv) {
  prepare_out_dir(opts.out_dir, opts.force);
  std::vector<std::string> domains;
  auto loaded = load_data(opts, /*require_labels=*/true, /*require_domain=*/true,
                          &domains);

  write_text_file_atomic(fs::path(opts.out_dir) / "corpus_clean.csv",
                         datapipe::corpus_to_csv(loaded.records));

  JsonValue summary = JsonValue::object();
  summary.set("input_rows",
              JsonValue::integer(static_cast<std::int64_t>(loaded.summary.input_rows)));
  summary.set("kept", JsonValue::integer(static_cast<std::int64_t>(loaded.summary.kept)));
  summary.set("dropped_empty_text",
              JsonValue::integer(
                  static_cast<std::int64_t>(loaded.summary.dropped_empty_text)));
  summary.set("dropped_unlabeled",
              JsonValue::integer(
                  static_cast<std::int64_t>(loaded.summary.dropped_unlabeled)));
  JsonValue per_domain = JsonValue::object();
  for (const auto& [domain, counts] : loaded.summary.per_domain) {
    JsonValue cell = JsonValue::object();
    cell.set("positive",
             JsonValue::integer(static_cast<std::int64_t>(counts.positive)));
    cell.set("negative",
             JsonValue::integer(static_cast<std::int64_t>(counts.negative)));
    per_domain.set(domain, std::move(cell));
  }
  summary.set("per_domain", std::move(per_domain));
  JsonValue totals = JsonValue::object();
  totals.set("positive", JsonValue::integer(
                             static_cast<std::int64_t>(loaded.summary.totals.positive)));
  totals.set("negative", JsonValue::integer(
                             static_cast<std::int64_t>(loaded.summary.totals.negative)));
  summary.set("totals", std::move(totals));
  write_text_file_atomic(fs::path(opts.out_dir) / "summary.json", summary.dump(2));

  JsonValue config = metrics_source_config(opts, "preprocess");
  JsonValue doms = JsonValue::array();
  for (const auto& d : domains) doms.push(JsonValue::string(d));
  config.set("domains", std::move(doms));
  write_resolved_config(opts, config);
  write_run_meta(opts, argv);
  std::cout << "kept " << loaded.summary.kept << " records ("
            << loaded.summary.dropped_empty_text << " empty, "
            << loaded.summary.dropped_unlabeled << " unlabeled dropped)\n";
  return kExitOk;
}

int cmd_train(const Options& opts, const std::vector<std::string>& argv) {
  prepare_out_dir(opts.out_dir, opts.force);
  std::vector<std::string> domains;
  auto loaded = load_data(opts, true, true, &domains);
  if (loaded.records.empty()) {
    throw capstext::InputError("train: corpus is empty after preprocessing");
  }

  trainer::HiddenStatesMap hmap;
  std::size_t precomputed_dim = 0;
  if (!opts.hdump_path.empty()) {
    hmap = load_hdump_map(opts.hdump_path, &precomputed_dim);
  }

  auto split_outcome = apply_split(loaded.records, opts);
  const auto model_config = make_model_config(opts, domains, precomputed_dim);
  const auto train_config = make_train_config(opts);

  auto result = trainer::train(split_outcome.train, model_config, train_config,
                               hmap.empty() ? nullptr : &hmap);

  trainer::save_checkpoint(fs::path(opts.out_dir) / "checkpoint.txt", result.model);
  trainer::save_history_csv(fs::path(opts.out_dir) / "history.csv", result.history);

  JsonValue config = metrics_source_config(opts, "train");
  config.set("train", train_config_json(opts, domains));
  config.set("mode", JsonValue::string(precomputed_dim > 0 ? "precomputed" : "toy"));
  write_resolved_config(opts, config);
  write_run_meta(opts, argv);

  std::cout << "trained " << result.history.size() << " epochs on "
            << split_outcome.train.size() << " records; final loss "
            << format_double(result.history.back().mean_loss) << "\n";
  return kExitOk;
}

evalkit::MetricSet evaluate_partition(
    const trainer::Model& model,
    const std::vector<datapipe::CorpusRecord>& records,
    const trainer::HiddenStatesMap* hmap, evalkit::BinaryConfusion* bc_out,
    evalkit::DomainConfusion* dc_out, evalkit::MetricSet* domain_out,
    std::vector<evalkit::PerDomainAccuracy>* per_domain_out) {
  std::vector<std::size_t> sent_pred, sent_true, dom_pred, dom_true;
  sent_pred.reserve(records.size());
  for (const auto& record : records) {
    const auto pred = trainer::predict_record(model, record, hmap);
    sent_pred.push_back(pred.sentiment);
    sent_true.push_back(record.polarity == datapipe::Polarity::positive ? 0 : 1);
    dom_pred.push_back(pred.domain);
    dom_true.push_back(model.config.domain_index(record.domain));
  }
  const auto bc = evalkit::confusion(sent_pred, sent_true, 0);
  const auto dc =
      evalkit::confusion_matrix(dom_pred, dom_true, model.config.num_domains());
  if (bc_out) *bc_out = bc;
  if (dc_out) *dc_out = dc;
  if (domain_out) *domain_out = evalkit::metrics(dc);
  if (per_domain_out) {
    per_domain_out->clear();
    const std::size_t k = model.config.num_domains();
    std::vector<std::size_t> support(k, 0), dom_hits(k, 0), sent_hits(k, 0);
    for (std::size_t i = 0; i < records.size(); ++i) {
      const std::size_t y = dom_true[i];
      ++support[y];
      if (dom_pred[i] == y) ++dom_hits[y];
      if (sent_pred[i] == sent_true[i]) ++sent_hits[y];
    }
    for (std::size_t d = 0; d < k; ++d) {
      evalkit::PerDomainAccuracy row;
      row.domain = model.config.domains[d];
      row.support = support[d];
      if (support[d] > 0) {
        row.domain_accuracy =
            static_cast<double>(dom_hits[d]) / static_cast<double>(support[d]);
        row.sentiment_accuracy =
            static_cast<double>(sent_hits[d]) / static_cast<double>(support[d]);
      }
      per_domain_out->push_back(row);
    }
  }
  return evalkit::metrics(bc);
}

int cmd_evaluate(const Options& opts, const std::vector<std::string>& argv) {
  prepare_out_dir(opts.out_dir, opts.force);
  if (opts.checkpoint_path.empty()) {
    throw capstext::UsageError("a checkpoint is required (--ckpt)");
  }
  trainer::Model model = trainer::load_checkpoint(opts.checkpoint_path);

  std::vector<std::string> domains = model.config.domains;
  Options data_opts = opts;
  data_opts.domains = domains;
  auto loaded = load_data(data_opts, true, true, nullptr);

  trainer::HiddenStatesMap hmap;
  if (!opts.hdump_path.empty()) {
    hmap = load_hdump_map(opts.hdump_path, nullptr);
  }
  if (model.config.mode == trainer::EncoderMode::precomputed && hmap.empty()) {
    throw capstext::UsageError(
        "checkpoint was trained on precomputed hidden states; supply --h-dump");
  }
  const trainer::HiddenStatesMap* hmap_ptr = hmap.empty() ? nullptr : &hmap;

  auto split_outcome = apply_split(loaded.records, opts);

  evalkit::ReportData report;
  report.config = metrics_source_config(opts, "evaluate");
  report.config.set("split_ratio", JsonValue::number(opts.split_ratio));
  report.dataset_summary = loaded.summary;

  evalkit::MetricSet domain_train, domain_test;
  report.polarity_train = evaluate_partition(model, split_outcome.train, hmap_ptr,
                                             nullptr, nullptr, &domain_train, nullptr);
  report.domain_train = domain_train;
  if (!split_outcome.test.empty()) {
    evalkit::BinaryConfusion bc;
    evalkit::DomainConfusion dc;
    std::vector<evalkit::PerDomainAccuracy> per_domain;
    report.polarity_test = evaluate_partition(model, split_outcome.test, hmap_ptr,
                                              &bc, &dc, &domain_test, &per_domain);
    report.domain_test = domain_test;
    report.polarity_confusion = bc;
    report.domain_confusion = dc;
    report.per_domain = std::move(per_domain);
  }

  emit_report(report, opts.out_dir);
  write_resolved_config(opts, report.config);
  write_run_meta(opts, argv);
  if (report.polarity_test) {
    std::cout << "polarity test accuracy "
              << format_double(report.polarity_test->accuracy) << ", domain "
              << format_double(report.domain_test->accuracy) << "\n";
  } else {
    std::cout << "polarity train accuracy "
              << format_double(report.polarity_train->accuracy) << "\n";
  }
  return kExitOk;
}

std::vector<double> series_from_report(const nlohmann::json& report,
                                       const std::string& task) {
  std::vector<double> out;
  const auto& series = report.at("folds").at(task).at("series");
  for (const auto& fold : series) {
    out.push_back(fold.at("accuracy").get<double>());
  }
  return out;
}

int cmd_kfold(const Options& opts, const std::vector<std::string>& argv) {
  prepare_out_dir(opts.out_dir, opts.force);
  std::vector<std::string> domains;
  auto loaded = load_data(opts, true, true, &domains);
  if (!opts.hdump_path.empty()) {
    throw capstext::UsageError("kfold trains the toy encoder; --h-dump is not supported");
  }

  const auto model_config = make_model_config(opts, domains, 0);
  const auto train_config = make_train_config(opts);
  auto result =
      evalkit::kfold_run(loaded.records, opts.k, model_config, train_config, opts.seed);

  evalkit::ReportData report;
  report.config = metrics_source_config(opts, "kfold");
  report.config.set("k", JsonValue::integer(static_cast<std::int64_t>(opts.k)));
  report.config.set("train", train_config_json(opts, domains));
  report.dataset_summary = loaded.summary;
  report.polarity_train = result.train_sentiment.mean;
  report.polarity_test = evalkit::metrics(result.sentiment_confusion);
  report.polarity_confusion = result.sentiment_confusion;
  report.domain_train = result.train_domain.mean;
  report.domain_test = evalkit::metrics(result.domain_confusion);
  report.domain_confusion = result.domain_confusion;
  report.per_domain = result.per_domain;
  report.folds_polarity = result.sentiment;
  report.folds_domain = result.domain;

  // Pairwise significance against any prior runs supplied with --compare.
  std::vector<std::pair<std::string, std::vector<double>>> polarity_series;
  std::vector<std::pair<std::string, std::vector<double>>> domain_series;
  polarity_series.emplace_back("capstext", result.fold_sentiment_accuracy);
  domain_series.emplace_back("capstext", result.fold_domain_accuracy);
  for (const auto& path : opts.compare_reports) {
    nlohmann::json other;
    try {
      std::ifstream in(path);
      if (!in) throw capstext::IoError("cannot open comparison report: " + path);
      other = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw capstext::ParseError("comparison report " + path + ": " + e.what());
    }
    const std::string label = fs::path(path).stem().string();
    auto pol = series_from_report(other, "polarity");
    auto dom = series_from_report(other, "domain");
    if (pol.size() != result.fold_sentiment_accuracy.size()) {
      throw capstext::InputError("comparison report " + path + " has " +
                                 std::to_string(pol.size()) + " folds, expected " +
                                 std::to_string(opts.k));
    }
    polarity_series.emplace_back(label, std::move(pol));
    domain_series.emplace_back(label, std::move(dom));
  }
  report.ttest_polarity = evalkit::ttest_matrix(polarity_series);
  report.ttest_domain = evalkit::ttest_matrix(domain_series);

  emit_report(report, opts.out_dir);
  write_resolved_config(opts, report.config);
  write_run_meta(opts, argv);

  std::cout << "kfold mean polarity accuracy "
            << format_double(result.sentiment.mean.accuracy) << " (std "
            << format_double(result.sentiment.stddev.accuracy) << "), domain "
            << format_double(result.domain.mean.accuracy) << " (std "
            << format_double(result.domain.stddev.accuracy) << ")\n";
  return kExitOk;
}

int cmd_predict(const Options& opts, const std::vector<std::string>& argv) {
  prepare_out_dir(opts.out_dir, opts.force);
  if (opts.checkpoint_path.empty()) {
    throw capstext::UsageError("a checkpoint is required (--ckpt)");
  }
  trainer::Model model = trainer::load_checkpoint(opts.checkpoint_path);

  Options data_opts = opts;
  data_opts.domains = model.config.domains;
  auto loaded = load_data(data_opts, /*require_labels=*/false,
                          /*require_domain=*/false, nullptr);

  trainer::HiddenStatesMap hmap;
  if (!opts.hdump_path.empty()) {
    hmap = load_hdump_map(opts.hdump_path, nullptr);
  }
  if (model.config.mode == trainer::EncoderMode::precomputed && hmap.empty()) {
    throw capstext::UsageError(
        "checkpoint was trained on precomputed hidden states; supply --h-dump");
  }
  const trainer::HiddenStatesMap* hmap_ptr = hmap.empty() ? nullptr : &hmap;

  std::string csv = "id,sentiment,domain,p_positive,p_negative";
  for (const auto& d : model.config.domains) csv += ",p_" + d;
  csv += "\n";
  for (const auto& record : loaded.records) {
    const auto fwd = trainer::forward_record(model, record, hmap_ptr);
    const auto pred = capstext::capshead::predict(fwd);
    csv += datapipe::csv_escape(record.id) + ",";
    csv += (pred.sentiment == 0 ? "positive" : "negative");
    csv += "," + model.config.domains[pred.domain];
    csv += "," + format_double(fwd.sentiment_p[0]);
    csv += "," + format_double(fwd.sentiment_p[1]);
    for (double p : fwd.domain_p) csv += "," + format_double(p);
    csv += "\n";
  }
  write_text_file_atomic(fs::path(opts.out_dir) / "predictions.csv", csv);

  write_resolved_config(opts, metrics_source_config(opts, "predict"));
  write_run_meta(opts, argv);
  std::cout << "predicted " << loaded.records.size() << " records\n";
  return kExitOk;
}

int cmd_gradcheck(const Options& opts) {
  capstext::selfcheck::GradCheckSpec spec;
  spec.hidden_dim = opts.gc_hidden_dim;
  spec.num_domains = opts.gc_num_domains;
  spec.seq_len = opts.gc_seq_len;
  spec.seed = opts.seed;
  spec.eps = opts.gc_eps;
  const auto outcome = capstext::selfcheck::run_grad_check(spec);
  std::cout << "max_relative_error " << format_double(outcome.max_relative_error)
            << "\n";
  std::cout << "parameters " << outcome.num_parameters << "\n";
  if (!(outcome.max_relative_error < 1e-4)) {
    throw capstext::NumericCheckError(
        "gradient check failed: max relative error " +
        format_double(outcome.max_relative_error) + " >= 1e-4");
  }
  return kExitOk;
}

int cmd_dump_h(const Options& opts, const std::vector<std::string>& argv) {
  prepare_out_dir(opts.out_dir, opts.force);
  if (opts.checkpoint_path.empty()) {
    throw capstext::UsageError("a checkpoint is required (--ckpt)");
  }
  trainer::Model model = trainer::load_checkpoint(opts.checkpoint_path);
  if (model.config.mode != trainer::EncoderMode::toy) {
    throw capstext::InputError("dump-h needs a checkpoint with a toy encoder");
  }

  Options data_opts = opts;
  data_opts.domains = model.config.domains;
  auto loaded = load_data(data_opts, /*require_labels=*/false,
                          /*require_domain=*/false, nullptr);
  if (loaded.records.empty()) {
    throw capstext::InputError("dump-h: no records after preprocessing");
  }

  std::vector<encoder::HdumpRecord> dump;
  dump.reserve(loaded.records.size());
  for (const auto& record : loaded.records) {
    dump.push_back(
        encoder::HdumpRecord{record.id, model.encode_text(record.text)});
  }
  encoder::save_hidden_states(fs::path(opts.out_dir) / "hidden_states.txt", dump);

  write_resolved_config(opts, metrics_source_config(opts, "dump-h"));
  write_run_meta(opts, argv);
  std::cout << "dumped hidden states for " << dump.size() << " records\n";
  return kExitOk;
}

int classify_exit(const std::exception& e) {
  if (dynamic_cast<const capstext::UsageError*>(&e)) return kExitUsage;
  if (dynamic_cast<const capstext::NumericCheckError*>(&e)) return kExitNumeric;
  return kExitData;
}

const char* code_name(int exit_code) {
  switch (exit_code) {
    case kExitUsage: return "usage";
    case kExitNumeric: return "numeric";
    default: return "data";
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"capstext: multi-task capsule-head text classifier"};
  app.require_subcommand(1);

  Options opts;
  std::vector<std::string> argv_copy(argv, argv + argc);

  const auto add_common = [&](CLI::App* cmd, bool needs_out) {
    auto* out = cmd->add_option("--out", opts.out_dir, "output directory");
    if (needs_out) out->required();
    cmd->add_option("--seed", opts.seed, "random seed");
    cmd->add_option("--config", opts.config_file, "JSON config file (flags win)");
    cmd->add_flag("--force", opts.force, "overwrite a non-empty output directory");
    cmd->add_option("--threads", opts.threads, "worker threads per batch");
  };
  const auto add_data = [&](CLI::App* cmd) {
    cmd->add_option("--data", opts.data_path, "input corpus CSV")->required();
    cmd->add_option("--domains", opts.domains,
                    "declared domain set (default: inferred, sorted)")
        ->delimiter(',');
  };
  const auto add_arch = [&](CLI::App* cmd) {
    cmd->add_option("--d", opts.hidden_dim, "encoder hidden size");
    cmd->add_option("--layers", opts.num_layers, "encoder layers");
    cmd->add_option("--heads", opts.num_heads, "attention heads");
    cmd->add_option("--ff-dim", opts.ff_dim, "feed-forward width");
    cmd->add_option("--max-seq-len", opts.max_seq_len, "sequence length cap");
  };
  const auto add_train = [&](CLI::App* cmd) {
    cmd->add_option("--epochs", opts.epochs, "training epochs");
    cmd->add_option("--batch-size", opts.batch_size, "mini-batch size");
    cmd->add_option("--lr", opts.learning_rate, "learning rate");
    cmd->add_option("--optimizer", opts.optimizer, "sgd or adam");
    cmd->add_option("--lambda-recon", opts.lambda_recon, "reconstruction weight");
    cmd->add_option("--patience", opts.patience, "early stop patience (0 = off)");
    cmd->add_flag("--class-weights", opts.class_weights,
                  "inverse-frequency sentiment weights");
    cmd->add_option("--val-fraction", opts.val_fraction,
                    "validation share of the training partition");
    cmd->add_option("--vocab-min-count", opts.vocab_min_count,
                    "minimum token count for the vocabulary");
  };

  auto* preprocess = app.add_subcommand("preprocess", "clean and label a corpus");
  add_common(preprocess, true);
  add_data(preprocess);

  auto* train = app.add_subcommand("train", "train a model");
  add_common(train, true);
  add_data(train);
  add_arch(train);
  add_train(train);
  train->add_option("--h-dump", opts.hdump_path,
                    "train the head on precomputed hidden states");
  train->add_option("--split-ratio", opts.split_ratio,
                    "train share of the data (1.0 = use everything)");

  auto* evaluate = app.add_subcommand("evaluate", "evaluate a checkpoint");
  add_common(evaluate, true);
  evaluate->add_option("--data", opts.data_path, "input corpus CSV")->required();
  evaluate->add_option("--ckpt", opts.checkpoint_path, "model checkpoint")->required();
  evaluate->add_option("--h-dump", opts.hdump_path, "hidden states for the records");
  evaluate->add_option("--split-ratio", opts.split_ratio,
                       "train share; test metrics come from the remainder");

  auto* kfold = app.add_subcommand("kfold", "k-fold cross-validation");
  add_common(kfold, true);
  add_data(kfold);
  add_arch(kfold);
  add_train(kfold);
  kfold->add_option("--k", opts.k, "number of folds");
  kfold->add_option("--h-dump", opts.hdump_path, "unsupported; kfold is toy-mode");
  kfold->add_option("--compare", opts.compare_reports,
                    "prior kfold report.json files for the t-test matrix");

  auto* predict = app.add_subcommand("predict", "per-record predictions");
  add_common(predict, true);
  predict->add_option("--data", opts.data_path, "input corpus CSV")->required();
  predict->add_option("--ckpt", opts.checkpoint_path, "model checkpoint")->required();
  predict->add_option("--h-dump", opts.hdump_path, "hidden states for the records");

  auto* gradcheck = app.add_subcommand("gradcheck", "verify gradients numerically");
  gradcheck->add_option("--seed", opts.seed, "random seed");
  gradcheck->add_option("--config", opts.config_file, "JSON config file");
  gradcheck->add_option("--d", opts.gc_hidden_dim, "hidden size");
  gradcheck->add_option("--num-domains", opts.gc_num_domains, "domain capsules");
  gradcheck->add_option("--seq-len", opts.gc_seq_len, "sequence length");
  gradcheck->add_option("--eps", opts.gc_eps, "central-difference step");

  auto* dump_h = app.add_subcommand("dump-h", "dump encoder hidden states");
  add_common(dump_h, true);
  dump_h->add_option("--data", opts.data_path, "input corpus CSV")->required();
  dump_h->add_option("--ckpt", opts.checkpoint_path, "model checkpoint")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    JsonValue error = JsonValue::object();
    JsonValue body = JsonValue::object();
    body.set("code", JsonValue::string("usage"));
    body.set("message", JsonValue::string(e.what()));
    error.set("error", std::move(body));
    std::cerr << error.dump(0) << "\n";
    return kExitUsage;
  }

  try {
    CLI::App* cmd = app.get_subcommands().front();
    apply_config_file(cmd, opts);
    if (opts.threads == 0) opts.threads = 1;
    if (cmd == preprocess) return cmd_preprocess(opts, argv_copy);
    if (cmd == train) return cmd_train(opts, argv_copy);
    if (cmd == evaluate) return cmd_evaluate(opts, argv_copy);
    if (cmd == kfold) return cmd_kfold(opts, argv_copy);
    if (cmd == predict) return cmd_predict(opts, argv_copy);
    if (cmd == gradcheck) return cmd_gradcheck(opts);
    if (cmd == dump_h) return cmd_dump_h(opts, argv_copy);
    throw capstext::UsageError("unknown subcommand");
  } catch (const std::exception& e) {
    const int exit_code = classify_exit(e);
    JsonValue error = JsonValue::object();
    JsonValue body = JsonValue::object();
    body.set("code", JsonValue::string(code_name(exit_code)));
    body.set("message", JsonValue::string(e.what()));
    error.set("error", std::move(body));
    std::cerr << error.dump(0) << "\n";
    return exit_code;
  }
}
