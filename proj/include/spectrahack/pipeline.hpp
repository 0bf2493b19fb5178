#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "spectrahack/metrics.hpp"
#include "spectrahack/razors.hpp"
#include "spectrahack/stats.hpp"
#include "spectrahack/tensor_io.hpp"

namespace spectrahack {

inline constexpr std::size_t kDefaultSampleCount = 800;
inline constexpr std::size_t kDefaultPartitionDirections = 1000;
inline constexpr const char* kSeedEnvVar = "SPECTRAHACK_SEED";

struct BatchManifest {
  std::string model_id;
  std::vector<std::filesystem::path> sample_paths;
  std::size_t batch_size = 0;
};

// {"model_id": str, "samples": [paths], "batch_size": int}. Relative sample
// paths are resolved against the manifest's directory.
BatchManifest load_manifest(const std::filesystem::path& path);
BatchManifest manifest_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
nlohmann::json manifest_to_json(const BatchManifest& m);

struct PipelineConfig {
  double alpha = kDefaultAlpha;
  double beta = kDefaultBeta;
  MetricSet metrics = MetricSet::all();
  std::size_t n_samples = kDefaultSampleCount;
  std::uint64_t seed = 0;
  std::optional<RazorConfig> razor;
  unsigned threads = 1;  // execution detail, never serialized into reports
};

void to_json(nlohmann::json& j, const PipelineConfig& c);
void from_json(const nlohmann::json& j, PipelineConfig& c);
PipelineConfig load_config(const std::filesystem::path& path);
// Replaces config.seed with SPECTRAHACK_SEED when that variable is set.
void apply_env_overrides(PipelineConfig& config);

void to_json(nlohmann::json& j, const MetricReport& r);
void from_json(const nlohmann::json& j, MetricReport& r);

struct BatchReport {
  std::string model_id;
  std::vector<std::string> samples;
  std::vector<MetricReport> per_sample;
  MetricReport aggregate;
  std::map<std::string, stats::ConvergenceSeries> convergence;
  PipelineConfig config;
};

void to_json(nlohmann::json& j, const BatchReport& r);
void from_json(const nlohmann::json& j, BatchReport& r);

// Processes the first min(batch_size, n_samples) samples in manifest order:
// preprocess, covariance, optional razor, metrics. The aggregate is the
// field-wise mean; any per-sample failure aborts with the sample index.
BatchReport run_pipeline(const BatchManifest& manifest, const PipelineConfig& config);

// In-memory variant used by run_pipeline once samples are loaded.
BatchReport run_pipeline_on(const std::string& model_id, const std::vector<RawMatrix>& samples,
                            const std::vector<std::string>& sample_names,
                            const PipelineConfig& config);

// Metrics for a single matrix (the `metrics` CLI command).
MetricReport evaluate_matrix(const RawMatrix& raw, const PipelineConfig& config);

// batch_report.json and convergence.csv.
void write_batch_outputs(const BatchReport& report, const std::filesystem::path& out_dir);
std::string batch_report_json(const BatchReport& report);
std::string convergence_csv(const BatchReport& report);

// Every *.json file under dir (sorted by name) parsed as a BatchReport.
std::vector<BatchReport> load_reports(const std::filesystem::path& dir);

struct CorrelationRow {
  std::string metric;
  std::string benchmark;
  std::optional<double> spearman;  // empty when either column is constant
  std::size_t n_models = 0;
};

// Spearman of every metric (report aggregates plus any metric: columns of
// the score table) against every benchmark column, CE included.
std::vector<CorrelationRow> meta_eval(const std::vector<BatchReport>& reports,
                                      const std::vector<ScoreTable>& scores);
std::string correlation_csv(const std::vector<CorrelationRow>& rows);
nlohmann::json correlation_json(const std::vector<CorrelationRow>& rows);

struct PartitionSummary {
  double mean = 0.0;
  double std = 0.0;
  double min = 0.0;
  double max = 0.0;
  double second_order_a = 1.0;
  std::vector<double> normalized_quantiles;  // quantiles of Z(c) / mean
};

struct RazorSampleComparison {
  std::size_t sample = 0;
  std::vector<double> eigen_quantiles_before;
  std::vector<double> eigen_quantiles_after;
  PartitionSummary partition_before;
  PartitionSummary partition_after;
  MetricReport metrics_before;
  MetricReport metrics_after;
};

struct RazorComparison {
  RazorConfig razor;
  std::vector<RazorSampleComparison> samples;
};

struct RazorComparisonReport {
  std::string model_id;
  std::vector<double> probs;
  std::size_t n_dirs = 0;
  std::vector<RazorComparison> razors;
};

RazorComparisonReport compare_razors(const BatchManifest& manifest, const PipelineConfig& config,
                                     const std::vector<RazorConfig>& razors, std::size_t n_dirs);
RazorComparisonReport compare_razors_on(const std::string& model_id,
                                        const std::vector<RawMatrix>& samples,
                                        const PipelineConfig& config,
                                        const std::vector<RazorConfig>& razors,
                                        std::size_t n_dirs);
// razor_compare.json, qq.csv, partition.csv, partition_quantiles.csv,
// metric_deltas.csv
void write_razor_outputs(const RazorComparisonReport& report, const std::filesystem::path& out_dir);

enum class UTestMode { PooledResidual, RawCompression };

struct ModelFit {
  std::string model_id;
  stats::RegressionFit fit;
  std::string stars;
};

struct PairwiseTest {
  std::string model_a;
  std::string model_b;
  stats::UTestResult test;
  std::string stars;
};

struct RegressionReport {
  std::vector<ModelFit> fits;
  std::vector<PairwiseTest> pairwise;
  UTestMode mode = UTestMode::PooledResidual;
};

// Per-model OLS of C_DE on log anisotropy over per-sample values, plus
// pairwise Mann-Whitney tests. PooledResidual compares residuals from one
// fit over all models (do the models' curves differ?); RawCompression
// compares the per-sample C_DE values directly.
RegressionReport regression_report(const std::vector<BatchReport>& reports,
                                   UTestMode mode = UTestMode::PooledResidual);
std::string regression_fits_csv(const RegressionReport& report);
std::string regression_pairwise_csv(const RegressionReport& report);

// Shortest decimal that round-trips, used by every CSV writer.
std::string format_double(double v);

}  // namespace spectrahack
