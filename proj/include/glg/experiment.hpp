#pragma once

// Experiment runner: builds private data, trains the model for a few
// federated rounds, captures the leak, runs the configured attack and
// scores it, repeated over independently seeded repetitions.

#include "glg/attack.hpp"
#include "glg/gnn.hpp"

#include <json.hpp>

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace glg::cli {

struct DatasetSpec {
  std::string kind = "synthetic";  // synthetic | er | files
  int nodes = 50;
  double avg_degree = 4.0;  // synthetic
  double edge_prob = 0.1;   // er
  int features = 10;
  int classes = 2;
  int hops = 2;  // node1: egonet radius around the target
  std::string features_path, edges_path, labels_path;  // files
  std::string name() const;
};

struct FlSpec {
  int rounds = 0;  // federated training rounds before the leaked one
  double lr = 0.01;
};

struct OutputSpec {
  std::string dir = ".";
  std::string format = "csv";
  bool dump_artifacts = false;
  bool record_timing = false;
};

struct ExperimentConfig {
  std::string name = "experiment";
  DatasetSpec dataset;
  gnn::Framework framework = gnn::Framework::sage;
  int layers = 2;
  int hidden = 100;
  attack::AttackSpec attack;
  int batch_size = 1;
  FlSpec fl;
  int repeats = 1;
  std::uint64_t seed = 0;
  int threads = 0;  // 0: hardware concurrency
  std::vector<double> taus;  // extra thresholded-MAE columns
  OutputSpec output;

  void validate() const;
  nlohmann::json to_json() const;
};

/// Parses and validates a config document. Errors name the offending
/// field, e.g. "config.attack.alpha: expected a number".
ExperimentConfig parse_config(const nlohmann::json& doc);
ExperimentConfig load_config(const std::string& path);

struct MetricSummary {
  int count = 0;
  double mean = 0.0;
  double std = 0.0;
  double min = 0.0;
  double max = 0.0;

  bool operator==(const MetricSummary&) const = default;
};

/// Metric names in report order.
const std::vector<std::string>& metric_names();

struct RunRecord {
  int repetition = 0;
  std::uint64_t seed = 0;
  bool ok = true;
  std::string error;
  std::map<std::string, double> metrics;
  double wall_seconds = 0.0;

  bool operator==(const RunRecord&) const = default;
};

struct ReportRow {
  std::string scenario;
  std::string framework;
  std::string dataset;
  std::string param;  // sweep parameter, empty for a plain run
  std::string value;
  int repeats = 0;
  int failures = 0;
  std::map<std::string, MetricSummary> metrics;
  std::map<std::string, std::string> hyper;
  std::optional<double> wall_seconds;
  std::vector<RunRecord> runs;

  bool operator==(const ReportRow&) const = default;
};

/// Name of the MAE column after thresholding at `tau`.
std::string tau_metric(double tau);

/// Hyperparameter column names in report order.
const std::vector<std::string>& hyper_names();

struct Experiment {
  ExperimentConfig config;
  std::vector<ReportRow> rows;
};

/// Number of worker threads: the config value (or the hardware concurrency)
/// capped by GLG_THREADS and by the repetition count.
int worker_count(const ExperimentConfig& config);

ReportRow run_experiment(const ExperimentConfig& config);

inline const std::vector<std::string> kSweepParams = {"alpha", "beta",   "hidden", "tau",
                                                      "batch_size", "d_tree", "init"};

/// One run per value with the same base seed.
std::vector<ReportRow> sweep(const ExperimentConfig& config, const std::string& param,
                             const std::vector<std::string>& values);

/// Copy of `config` with one sweep parameter set from text.
ExperimentConfig with_param(const ExperimentConfig& config, const std::string& param,
                            const std::string& value);

}  // namespace glg::cli
