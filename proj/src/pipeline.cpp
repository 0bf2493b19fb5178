#include "spectrahack/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "spectrahack/error.hpp"
#include "spectrahack/parallel.hpp"

namespace spectrahack {
namespace {

using nlohmann::json;

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseFailure, path.string() + ": " + e.what());
  }
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot open for writing: " + path.string());
  out << text;
  out.flush();
  if (!out) throw Error(ErrorCode::IoFailure, "write failed: " + path.string());
}

json optional_number(const std::optional<double>& v) {
  return v ? json(*v) : json(nullptr);
}

std::optional<double> read_optional(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<double>();
}

std::string csv_cell(const std::optional<double>& v) { return v ? format_double(*v) : ""; }

bool needs_embedding(const PipelineConfig& config) {
  return config.razor && (config.razor->kind == RazorKind::Whitening ||
                          config.razor->kind == RazorKind::RemoveDirections);
}

Error attribute(const Error& e, std::size_t index, const std::string& name) {
  return Error(e.code(), "sample " + std::to_string(index) + " (" + name + "): " + e.message(), index);
}

MetricReport metrics_for(const RawMatrix& raw, const PipelineConfig& config) {
  const EmbeddingMatrix emb = preprocess(raw);
  if (!config.razor) {
    return compute_metrics(covariance_eigenvalues(emb, config.alpha), config.alpha, config.beta,
                           config.metrics);
  }
  CovarianceSpectrum spec;
  if (needs_embedding(config)) {
    spec = covariance(emb, config.alpha);
  } else {
    spec.eigenvalues = covariance_eigenvalues(emb, config.alpha);
    spec.alpha = config.alpha;
    spec.vocab_size = emb.vocab_size();
  }
  const RazorResult res = apply_razor(*config.razor, emb, spec, config.alpha);
  return compute_metrics(res.spectrum_after.eigenvalues, config.alpha, config.beta,
                         config.metrics);
}

std::vector<RawMatrix> load_samples(const BatchManifest& manifest, std::size_t count,
                                    unsigned threads) {
  std::vector<RawMatrix> samples(count);
  parallel_for(count, threads, [&](std::size_t i) {
    try {
      samples[i] = read_matrix_auto(manifest.sample_paths[i]);
    } catch (const Error& e) {
      throw attribute(e, i, manifest.sample_paths[i].string());
    }
  });
  return samples;
}

std::size_t effective_count(const BatchManifest& manifest, const PipelineConfig& config) {
  return std::min({manifest.batch_size, config.n_samples, manifest.sample_paths.size()});
}

std::vector<double> percentile_probs() {
  std::vector<double> probs;
  for (int i = 1; i <= 99; ++i) probs.push_back(i / 100.0);
  return probs;
}

PartitionSummary summarize(const PartitionDiagnostic& d, std::span<const double> probs) {
  PartitionSummary s;
  s.mean = d.mean;
  s.std = d.std;
  s.min = d.min;
  s.max = d.max;
  s.second_order_a = d.second_order_a;
  std::vector<double> normalized;
  normalized.reserve(d.samples.size());
  for (double z : d.samples) normalized.push_back(z / d.mean);
  for (const auto& [p, q] : spectrum_quantiles(normalized, probs)) s.normalized_quantiles.push_back(q);
  return s;
}

std::vector<double> quantile_values(std::span<const double> eigenvalues,
                                    std::span<const double> probs) {
  std::vector<double> out;
  for (const auto& [p, q] : spectrum_quantiles(eigenvalues, probs)) out.push_back(q);
  return out;
}

json summary_json(const PartitionSummary& s) {
  return json{{"mean", s.mean},
              {"std", s.std},
              {"min", s.min},
              {"max", s.max},
              {"second_order_a", s.second_order_a},
              {"normalized_quantiles", s.normalized_quantiles}};
}

}  // namespace

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

// ---------------------------------------------------------------- manifest

BatchManifest manifest_from_json(const json& j, const std::filesystem::path& base_dir) {
  if (!j.is_object() || !j.contains("model_id") || !j.contains("samples")) {
    throw Error(ErrorCode::ParseFailure, "manifest needs model_id and samples");
  }
  BatchManifest m;
  try {
    m.model_id = j.at("model_id").get<std::string>();
    for (const auto& p : j.at("samples")) {
      std::filesystem::path path = p.get<std::string>();
      m.sample_paths.push_back(path.is_absolute() ? path : base_dir / path);
    }
    m.batch_size = j.contains("batch_size") ? j.at("batch_size").get<std::size_t>()
                                            : m.sample_paths.size();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseFailure, std::string("manifest: ") + e.what());
  }
  if (m.sample_paths.empty()) throw Error(ErrorCode::InvalidArgument, "manifest lists no samples");
  if (m.batch_size == 0 || m.batch_size > m.sample_paths.size()) {
    throw Error(ErrorCode::InvalidArgument, "batch_size must be in [1, number of samples]");
  }
  return m;
}

BatchManifest load_manifest(const std::filesystem::path& path) {
  return manifest_from_json(read_json_file(path), path.parent_path());
}

json manifest_to_json(const BatchManifest& m) {
  json samples = json::array();
  for (const auto& p : m.sample_paths) samples.push_back(p.string());
  return json{{"model_id", m.model_id}, {"samples", samples}, {"batch_size", m.batch_size}};
}

// ------------------------------------------------------------------ config

void to_json(json& j, const PipelineConfig& c) {
  json metrics = json::array();
  for (Metric m : kAllMetrics) {
    if (c.metrics.contains(m)) metrics.push_back(metric_name(m));
  }
  j = json{{"alpha", c.alpha},         {"beta", c.beta}, {"metrics", metrics},
           {"n_samples", c.n_samples}, {"seed", c.seed}};
  j["razor"] = c.razor ? json(*c.razor) : json(nullptr);
}

void from_json(const json& j, PipelineConfig& c) {
  c = PipelineConfig{};
  if (!j.is_object()) throw Error(ErrorCode::ParseFailure, "config must be a JSON object");
  try {
    if (j.contains("alpha")) c.alpha = j.at("alpha").get<double>();
    if (j.contains("beta")) c.beta = j.at("beta").get<double>();
    if (j.contains("n_samples")) c.n_samples = j.at("n_samples").get<std::size_t>();
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("threads")) c.threads = j.at("threads").get<unsigned>();
    if (j.contains("metrics")) {
      MetricSet set;
      for (const auto& name : j.at("metrics")) {
        const auto m = metric_from_name(name.get<std::string>());
        if (!m) throw Error(ErrorCode::ParseFailure, "unknown metric " + name.dump());
        set.add(*m);
      }
      if (set.empty()) throw Error(ErrorCode::InvalidArgument, "metric set is empty");
      c.metrics = set;
    }
    if (j.contains("razor") && !j.at("razor").is_null()) c.razor = j.at("razor").get<RazorConfig>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseFailure, std::string("config: ") + e.what());
  }
  if (!(c.alpha > 0.0)) throw Error(ErrorCode::InvalidArgument, "alpha must be positive");
  if (!(c.beta >= 0.0 && c.beta <= 1.0)) throw Error(ErrorCode::BetaOutOfRange, "beta not in [0,1]");
  if (c.n_samples == 0) throw Error(ErrorCode::InvalidArgument, "n_samples must be positive");
}

PipelineConfig load_config(const std::filesystem::path& path) {
  return read_json_file(path).get<PipelineConfig>();
}

void apply_env_overrides(PipelineConfig& config) {
  const char* env = std::getenv(kSeedEnvVar);
  if (env == nullptr || *env == '\0') return;
  std::uint64_t seed = 0;
  const std::string_view s(env);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), seed);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw Error(ErrorCode::ParseFailure, std::string(kSeedEnvVar) + " is not an unsigned integer");
  }
  config.seed = seed;
}

// ------------------------------------------------------------------ report

void to_json(json& j, const MetricReport& r) {
  j = json{{"c_de", optional_number(r.c_de)},
           {"anisotropy", optional_number(r.anisotropy)},
           {"c_se", optional_number(r.c_se)},
           {"semantic_cv", optional_number(r.semantic_cv)},
           {"c_pcs", optional_number(r.c_pcs)},
           {"alpha", r.alpha},
           {"beta", r.beta}};
}

void from_json(const json& j, MetricReport& r) {
  r = MetricReport{};
  r.c_de = read_optional(j, "c_de");
  r.anisotropy = read_optional(j, "anisotropy");
  r.c_se = read_optional(j, "c_se");
  r.semantic_cv = read_optional(j, "semantic_cv");
  r.c_pcs = read_optional(j, "c_pcs");
  if (j.contains("alpha")) r.alpha = j.at("alpha").get<double>();
  if (j.contains("beta")) r.beta = j.at("beta").get<double>();
}

void to_json(json& j, const BatchReport& r) {
  json conv = json::object();
  for (const auto& [name, series] : r.convergence) {
    conv[name] = json{{"sample_counts", series.sample_counts},
                      {"cumulative_means", series.cumulative_means}};
  }
  j = json{{"model_id", r.model_id},   {"samples", r.samples},     {"per_sample", r.per_sample},
           {"aggregate", r.aggregate}, {"convergence", conv}, {"config", r.config}};
}

void from_json(const json& j, BatchReport& r) {
  r = BatchReport{};
  try {
    r.model_id = j.at("model_id").get<std::string>();
    if (j.contains("samples")) r.samples = j.at("samples").get<std::vector<std::string>>();
    r.per_sample = j.at("per_sample").get<std::vector<MetricReport>>();
    r.aggregate = j.at("aggregate").get<MetricReport>();
    if (j.contains("convergence")) {
      for (const auto& [name, s] : j.at("convergence").items()) {
        stats::ConvergenceSeries series;
        series.sample_counts = s.at("sample_counts").get<std::vector<std::size_t>>();
        series.cumulative_means = s.at("cumulative_means").get<std::vector<double>>();
        r.convergence[name] = std::move(series);
      }
    }
    if (j.contains("config")) r.config = j.at("config").get<PipelineConfig>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseFailure, std::string("batch report: ") + e.what());
  }
}

// ---------------------------------------------------------------- pipeline

MetricReport evaluate_matrix(const RawMatrix& raw, const PipelineConfig& config) {
  return metrics_for(raw, config);
}

BatchReport run_pipeline_on(const std::string& model_id, const std::vector<RawMatrix>& samples,
                            const std::vector<std::string>& sample_names,
                            const PipelineConfig& config) {
  if (samples.empty()) throw Error(ErrorCode::EmptyInput, "batch has no samples");
  if (sample_names.size() != samples.size()) {
    throw Error(ErrorCode::LengthMismatch, "sample names and samples differ in length");
  }
  const std::size_t dim = samples.front().cols();
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (samples[i].cols() != dim) {
      throw Error(ErrorCode::DimMismatch,
                  "sample " + std::to_string(i) + " (" + sample_names[i] + ") has dim " +
                      std::to_string(samples[i].cols()) + ", expected " + std::to_string(dim),
                  i);
    }
  }

  BatchReport report;
  report.model_id = model_id;
  report.samples = sample_names;
  report.config = config;
  report.per_sample.resize(samples.size());
  parallel_for(samples.size(), config.threads, [&](std::size_t i) {
    try {
      report.per_sample[i] = metrics_for(samples[i], config);
    } catch (const Error& e) {
      throw attribute(e, i, sample_names[i]);
    }
  });

  report.aggregate.alpha = config.alpha;
  report.aggregate.beta = config.beta;
  for (Metric m : kAllMetrics) {
    if (!config.metrics.contains(m)) continue;
    std::vector<double> values;
    values.reserve(samples.size());
    for (const auto& r : report.per_sample) values.push_back(*r.get(m));
    auto series = stats::convergence_series(values);
    report.aggregate.set(m, series.cumulative_means.back());
    report.convergence[metric_name(m)] = std::move(series);
  }
  return report;
}

BatchReport run_pipeline(const BatchManifest& manifest, const PipelineConfig& config) {
  const std::size_t count = effective_count(manifest, config);
  const auto samples = load_samples(manifest, count, config.threads);
  std::vector<std::string> names;
  for (std::size_t i = 0; i < count; ++i) names.push_back(manifest.sample_paths[i].filename().string());
  return run_pipeline_on(manifest.model_id, samples, names, config);
}

std::string batch_report_json(const BatchReport& report) {
  return json(report).dump(2) + "\n";
}

std::string convergence_csv(const BatchReport& report) {
  std::ostringstream out;
  out << "sample_count";
  std::vector<const stats::ConvergenceSeries*> cols;
  for (Metric m : kAllMetrics) {
    const auto it = report.convergence.find(metric_name(m));
    if (it == report.convergence.end()) continue;
    out << ',' << it->first;
    cols.push_back(&it->second);
  }
  out << '\n';
  const std::size_t rows = cols.empty() ? 0 : cols.front()->sample_counts.size();
  for (std::size_t k = 0; k < rows; ++k) {
    out << cols.front()->sample_counts[k];
    for (const auto* c : cols) out << ',' << format_double(c->cumulative_means[k]);
    out << '\n';
  }
  return out.str();
}

void write_batch_outputs(const BatchReport& report, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  write_text(out_dir / "batch_report.json", batch_report_json(report));
  write_text(out_dir / "convergence.csv", convergence_csv(report));
}

std::vector<BatchReport> load_reports(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw Error(ErrorCode::IoFailure, "not a directory: " + dir.string());
  }
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::recursive_directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<BatchReport> reports;
  for (const auto& f : files) reports.push_back(read_json_file(f).get<BatchReport>());
  return reports;
}

// --------------------------------------------------------------- meta-eval

std::vector<CorrelationRow> meta_eval(const std::vector<BatchReport>& reports,
                                      const std::vector<ScoreTable>& scores) {
  std::map<std::string, const ScoreTable*> by_id;
  for (const auto& s : scores) by_id[s.model_id] = &s;
  std::set<std::string> seen;
  std::vector<std::pair<const BatchReport*, const ScoreTable*>> joined;
  for (const auto& r : reports) {
    const auto it = by_id.find(r.model_id);
    if (it == by_id.end()) {
      throw Error(ErrorCode::JoinMiss, "no scores for model '" + r.model_id + "'");
    }
    if (!seen.insert(r.model_id).second) {
      throw Error(ErrorCode::DuplicateModelId, "two reports for model '" + r.model_id + "'");
    }
    joined.emplace_back(&r, it->second);
  }
  if (joined.size() < 3) {
    throw Error(ErrorCode::InsufficientModels,
                "meta-evaluation needs at least 3 joined models, have " +
                    std::to_string(joined.size()));
  }

  // Metric columns: report aggregates first (fixed order), then extra
  // metric: columns present for every joined model.
  std::vector<std::pair<std::string, std::vector<double>>> metric_cols;
  for (Metric m : kAllMetrics) {
    std::vector<double> col;
    for (const auto& [r, s] : joined) {
      const auto v = r->aggregate.get(m);
      if (!v) break;
      col.push_back(*v);
    }
    if (col.size() == joined.size()) metric_cols.emplace_back(metric_name(m), std::move(col));
  }
  for (const auto& [name, _] : joined.front().second->metric_values) {
    std::vector<double> col;
    for (const auto& [r, s] : joined) {
      const auto it = s->metric_values.find(name);
      if (it == s->metric_values.end()) break;
      col.push_back(it->second);
    }
    if (col.size() == joined.size()) metric_cols.emplace_back(name, std::move(col));
  }

  std::vector<std::string> benchmarks;
  for (const auto& [name, _] : joined.front().second->ground_truth) {
    if (name != kComprehensiveColumn) benchmarks.push_back(name);
  }
  if (joined.front().second->ground_truth.contains(kComprehensiveColumn)) {
    benchmarks.push_back(kComprehensiveColumn);
  }

  std::vector<CorrelationRow> rows;
  for (const auto& [metric, values] : metric_cols) {
    for (const auto& bench : benchmarks) {
      std::vector<double> truth;
      for (const auto& [r, s] : joined) {
        const auto it = s->ground_truth.find(bench);
        if (it == s->ground_truth.end()) {
          throw Error(ErrorCode::JoinMiss,
                      "model '" + s->model_id + "' lacks benchmark column " + bench);
        }
        truth.push_back(it->second);
      }
      CorrelationRow row{metric, bench, std::nullopt, joined.size()};
      try {
        row.spearman = stats::spearman(values, truth);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::ConstantInput) throw;
      }
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

std::string correlation_csv(const std::vector<CorrelationRow>& rows) {
  std::ostringstream out;
  out << "metric,benchmark,spearman,n_models\n";
  for (const auto& r : rows) {
    out << r.metric << ',' << r.benchmark << ',' << csv_cell(r.spearman) << ',' << r.n_models
        << '\n';
  }
  return out.str();
}

json correlation_json(const std::vector<CorrelationRow>& rows) {
  json arr = json::array();
  for (const auto& r : rows) {
    arr.push_back(json{{"metric", r.metric},
                       {"benchmark", r.benchmark},
                       {"spearman", optional_number(r.spearman)},
                       {"n_models", r.n_models}});
  }
  return json{{"correlations", arr}};
}

// ----------------------------------------------------------- razor compare

RazorComparisonReport compare_razors_on(const std::string& model_id,
                                        const std::vector<RawMatrix>& samples,
                                        const PipelineConfig& config,
                                        const std::vector<RazorConfig>& razors,
                                        std::size_t n_dirs) {
  if (razors.empty()) throw Error(ErrorCode::InvalidArgument, "no razors to compare");
  if (samples.empty()) throw Error(ErrorCode::EmptyInput, "batch has no samples");
  RazorComparisonReport report;
  report.model_id = model_id;
  report.probs = percentile_probs();
  report.n_dirs = n_dirs;
  report.razors.resize(razors.size());
  for (std::size_t r = 0; r < razors.size(); ++r) {
    report.razors[r].razor = razors[r];
    report.razors[r].samples.resize(samples.size());
  }
  const std::size_t dim = samples.front().cols();

  parallel_for(samples.size(), config.threads, [&](std::size_t i) {
    try {
      if (samples[i].cols() != dim) {
        throw Error(ErrorCode::DimMismatch, "dimension differs from sample 0");
      }
      const EmbeddingMatrix emb = preprocess(samples[i]);
      const CovarianceSpectrum spec = covariance(emb, config.alpha);
      // Same directions before and after every razor for this sample.
      const std::uint64_t dir_seed = config.seed + i;
      const auto before_diag = summarize(partition_diagnostic(emb, spec, n_dirs, dir_seed),
                                         report.probs);
      const auto before_q = quantile_values(spec.eigenvalues, report.probs);
      const auto before_m =
          compute_metrics(spec.eigenvalues, config.alpha, config.beta, config.metrics);
      for (std::size_t r = 0; r < razors.size(); ++r) {
        const RazorResult res = apply_razor(razors[r], emb, spec, config.alpha);
        const EmbeddingMatrix moved = res.embedding_after
                                          ? *res.embedding_after
                                          : map_embedding_to_spectrum(emb, spec, res.spectrum_after);
        auto& out = report.razors[r].samples[i];
        out.sample = i;
        out.eigen_quantiles_before = before_q;
        out.eigen_quantiles_after = quantile_values(res.spectrum_after.eigenvalues, report.probs);
        out.partition_before = before_diag;
        out.partition_after = summarize(
            partition_diagnostic(moved, res.spectrum_after, n_dirs, dir_seed), report.probs);
        out.metrics_before = before_m;
        out.metrics_after = compute_metrics(res.spectrum_after.eigenvalues, config.alpha,
                                            config.beta, config.metrics);
      }
    } catch (const Error& e) {
      throw Error(e.code(), "sample " + std::to_string(i) + ": " + e.message(), i);
    }
  });
  return report;
}

RazorComparisonReport compare_razors(const BatchManifest& manifest, const PipelineConfig& config,
                                     const std::vector<RazorConfig>& razors, std::size_t n_dirs) {
  const std::size_t count = effective_count(manifest, config);
  return compare_razors_on(manifest.model_id, load_samples(manifest, count, config.threads),
                           config, razors, n_dirs);
}

void write_razor_outputs(const RazorComparisonReport& report, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  json razors = json::array();
  std::ostringstream qq, part, partq, deltas;
  qq << "razor_index,razor,sample,prob,before,after\n";
  part << "razor_index,razor,sample,stage,mean,std,min,max,second_order_a\n";
  partq << "razor_index,razor,sample,prob,before,after\n";
  deltas << "razor_index,razor,sample,metric,before,after,delta\n";
  for (std::size_t r = 0; r < report.razors.size(); ++r) {
    const auto& rc = report.razors[r];
    const std::string name = to_string(rc.razor.kind);
    json samples = json::array();
    for (const auto& s : rc.samples) {
      for (std::size_t k = 0; k < report.probs.size(); ++k) {
        qq << r << ',' << name << ',' << s.sample << ',' << format_double(report.probs[k]) << ','
           << format_double(s.eigen_quantiles_before[k]) << ','
           << format_double(s.eigen_quantiles_after[k]) << '\n';
        partq << r << ',' << name << ',' << s.sample << ',' << format_double(report.probs[k])
              << ',' << format_double(s.partition_before.normalized_quantiles[k]) << ','
              << format_double(s.partition_after.normalized_quantiles[k]) << '\n';
      }
      for (const auto* stage : {&s.partition_before, &s.partition_after}) {
        part << r << ',' << name << ',' << s.sample << ','
             << (stage == &s.partition_before ? "before" : "after") << ','
             << format_double(stage->mean) << ',' << format_double(stage->std) << ','
             << format_double(stage->min) << ',' << format_double(stage->max) << ','
             << format_double(stage->second_order_a) << '\n';
      }
      json delta = json::object();
      for (Metric m : kAllMetrics) {
        const auto b = s.metrics_before.get(m);
        const auto a = s.metrics_after.get(m);
        if (!b || !a) continue;
        deltas << r << ',' << name << ',' << s.sample << ',' << metric_name(m) << ','
               << format_double(*b) << ',' << format_double(*a) << ',' << format_double(*a - *b)
               << '\n';
        delta[metric_name(m)] = *a - *b;
      }
      samples.push_back(json{{"sample", s.sample},
                             {"eigen_quantiles_before", s.eigen_quantiles_before},
                             {"eigen_quantiles_after", s.eigen_quantiles_after},
                             {"partition_before", summary_json(s.partition_before)},
                             {"partition_after", summary_json(s.partition_after)},
                             {"metrics_before", s.metrics_before},
                             {"metrics_after", s.metrics_after},
                             {"metric_deltas", delta}});
    }
    razors.push_back(json{{"razor", rc.razor}, {"samples", samples}});
  }
  const json doc{{"model_id", report.model_id},
                 {"probs", report.probs},
                 {"n_dirs", report.n_dirs},
                 {"razors", razors}};
  write_text(out_dir / "razor_compare.json", doc.dump(2) + "\n");
  write_text(out_dir / "qq.csv", qq.str());
  write_text(out_dir / "partition.csv", part.str());
  write_text(out_dir / "partition_quantiles.csv", partq.str());
  write_text(out_dir / "metric_deltas.csv", deltas.str());
}

// -------------------------------------------------------------- regression

RegressionReport regression_report(const std::vector<BatchReport>& reports, UTestMode mode) {
  RegressionReport out;
  out.mode = mode;
  std::vector<std::vector<double>> log_a(reports.size()), de(reports.size());
  for (std::size_t m = 0; m < reports.size(); ++m) {
    std::vector<stats::AnisotropyCompression> pairs;
    for (std::size_t i = 0; i < reports[m].per_sample.size(); ++i) {
      const auto& s = reports[m].per_sample[i];
      if (!s.anisotropy || !s.c_de) {
        throw Error(ErrorCode::InvalidArgument,
                    "model '" + reports[m].model_id + "' sample lacks anisotropy or c_de", i);
      }
      pairs.push_back({*s.anisotropy, *s.c_de});
      log_a[m].push_back(std::log(*s.anisotropy));
      de[m].push_back(*s.c_de);
    }
    try {
      const auto fit = stats::regress_compression_on_log_anisotropy(pairs);
      out.fits.push_back({reports[m].model_id, fit, stats::significance_stars(fit.p_value)});
    } catch (const Error& e) {
      throw Error(e.code(), "model '" + reports[m].model_id + "': " + e.message(), m);
    }
  }

  std::vector<std::vector<double>> populations = de;
  if (mode == UTestMode::PooledResidual) {
    std::vector<double> all_x, all_y;
    for (std::size_t m = 0; m < reports.size(); ++m) {
      all_x.insert(all_x.end(), log_a[m].begin(), log_a[m].end());
      all_y.insert(all_y.end(), de[m].begin(), de[m].end());
    }
    const auto pooled = stats::ols(all_x, all_y);
    for (std::size_t m = 0; m < reports.size(); ++m) {
      for (std::size_t i = 0; i < de[m].size(); ++i) {
        populations[m][i] = de[m][i] - (pooled.intercept + pooled.slope * log_a[m][i]);
      }
    }
  }
  for (std::size_t a = 0; a < reports.size(); ++a) {
    for (std::size_t b = a + 1; b < reports.size(); ++b) {
      const auto test = stats::mann_whitney_u(populations[a], populations[b]);
      out.pairwise.push_back({reports[a].model_id, reports[b].model_id, test,
                              stats::significance_stars(test.p_value)});
    }
  }
  return out;
}

std::string regression_fits_csv(const RegressionReport& report) {
  std::ostringstream out;
  out << "model_id,n,slope,intercept,r_squared,p_value,stars\n";
  for (const auto& f : report.fits) {
    out << f.model_id << ',' << f.fit.n << ',' << format_double(f.fit.slope) << ','
        << format_double(f.fit.intercept) << ',' << format_double(f.fit.r_squared) << ','
        << format_double(f.fit.p_value) << ',' << f.stars << '\n';
  }
  return out.str();
}

std::string regression_pairwise_csv(const RegressionReport& report) {
  std::ostringstream out;
  out << "model_a,model_b,mode,n1,n2,u_statistic,p_value,method,stars\n";
  const char* mode = report.mode == UTestMode::PooledResidual ? "pooled_residual" : "raw";
  for (const auto& p : report.pairwise) {
    out << p.model_a << ',' << p.model_b << ',' << mode << ',' << p.test.n1 << ',' << p.test.n2
        << ',' << format_double(p.test.u_statistic) << ',' << format_double(p.test.p_value) << ','
        << (p.test.method == stats::UMethod::Exact ? "exact" : "normal") << ',' << p.stars << '\n';
  }
  return out.str();
}

}  // namespace spectrahack
