#include <CLI11.hpp>

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "spectrahack/error.hpp"
#include "spectrahack/pipeline.hpp"
#include "spectrahack/shrink_sim.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using spectrahack::Error;
using spectrahack::ErrorCode;

namespace {

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot open for writing: " + path.string());
  out << text;
  if (!out.flush()) throw Error(ErrorCode::IoFailure, "write failed: " + path.string());
}

// "<dir>/<stem><suffix>" next to `path`, e.g. out.csv -> out_pairwise.csv.
fs::path sibling(const fs::path& path, const std::string& suffix) {
  return path.parent_path() / (path.stem().string() + suffix);
}

// Accepts inline JSON or a path to a JSON file.
json json_argument(const std::string& arg, const char* what) {
  std::string text = arg;
  const auto first = arg.find_first_not_of(" \t\r\n");
  if (first == std::string::npos || (arg[first] != '{' && arg[first] != '[')) {
    std::ifstream in(arg);
    if (!in) throw Error(ErrorCode::IoFailure, std::string("cannot open ") + what + " file " + arg);
    std::ostringstream buf;
    buf << in.rdbuf();
    text = buf.str();
  }
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseFailure, std::string(what) + ": " + e.what());
  }
}

spectrahack::RazorConfig parse_razor(const json& j) {
  try {
    return j.get<spectrahack::RazorConfig>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseFailure, std::string("razor: ") + e.what());
  }
}

unsigned resolve_threads(unsigned requested) {
  if (requested != 0) return requested;
  return std::max(1u, std::thread::hardware_concurrency());
}

spectrahack::PipelineConfig base_config(const std::string& config_path) {
  spectrahack::PipelineConfig config;
  if (!config_path.empty()) config = spectrahack::load_config(config_path);
  spectrahack::apply_env_overrides(config);
  return config;
}

std::string simulation_csv(const std::vector<spectrahack::shrink::MseTrialResult>& results) {
  std::ostringstream out;
  out << "estimator,sample_size,trials,intensity,mse,bias_sq,variance,small_sample\n";
  for (const auto& r : results) {
    out << to_string(r.estimator) << ',' << r.sample_size << ',' << r.trials << ','
        << spectrahack::format_double(r.intensity) << ','
        << spectrahack::format_double(r.mean_frobenius_mse) << ','
        << spectrahack::format_double(r.bias_sq) << ','
        << spectrahack::format_double(r.variance) << ',' << (r.small_sample ? 1 : 0) << '\n';
  }
  return out.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spectral compression and anisotropy metrics for embedding matrices"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  // metrics
  std::string m_input, m_out, m_razor;
  double m_alpha = spectrahack::kDefaultAlpha, m_beta = spectrahack::kDefaultBeta;
  auto* metrics = app.add_subcommand("metrics", "Metrics for one embedding matrix (EMB1 or CSV)");
  metrics->add_option("--input", m_input, "EMB1 or CSV matrix")->required();
  metrics->add_option("--alpha", m_alpha, "Covariance regularizer")->capture_default_str();
  metrics->add_option("--beta", m_beta, "PCS smoothing strength")->capture_default_str();
  metrics->add_option("--razor", m_razor, "Razor config, inline JSON or file");
  metrics->add_option("--out", m_out, "Output JSON")->required();

  // pipeline
  std::string p_manifest, p_config, p_out;
  unsigned threads = 1;
  auto* pipeline = app.add_subcommand("pipeline", "Per-sample metrics and batch aggregation");
  pipeline->add_option("--manifest", p_manifest, "Batch manifest JSON")->required();
  pipeline->add_option("--config", p_config, "Pipeline config JSON");
  pipeline->add_option("--out-dir", p_out, "Output directory")->required();
  pipeline->add_option("--threads", threads, "Worker threads, 0 = all cores")->capture_default_str();

  // meta-eval
  std::string e_reports, e_scores, e_out;
  auto* meta = app.add_subcommand("meta-eval", "Spearman correlation of metrics with benchmarks");
  meta->add_option("--reports", e_reports, "Directory of batch report JSON files")->required();
  meta->add_option("--scores", e_scores, "Benchmark score CSV")->required();
  meta->add_option("--out", e_out, "Output CSV (a .json sibling is also written)")->required();

  // razor-compare
  std::string r_manifest, r_razors, r_out, r_config;
  std::size_t r_dirs = spectrahack::kDefaultPartitionDirections;
  auto* razor = app.add_subcommand("razor-compare", "Spectra and Z(c) before/after each razor");
  razor->add_option("--manifest", r_manifest, "Batch manifest JSON")->required();
  razor->add_option("--razors", r_razors, "JSON array of razor configs, inline or file")->required();
  razor->add_option("--n-dirs", r_dirs, "Sampled directions per sample")->capture_default_str();
  razor->add_option("--config", r_config, "Pipeline config JSON");
  razor->add_option("--out-dir", r_out, "Output directory")->required();
  razor->add_option("--threads", threads, "Worker threads, 0 = all cores")->capture_default_str();

  // regression
  std::string g_reports, g_out, g_mode = "pooled";
  auto* regression = app.add_subcommand("regression", "C_DE vs log anisotropy fits and U tests");
  regression->add_option("--reports", g_reports, "Directory of batch report JSON files")->required();
  regression->add_option("--out", g_out, "Fits CSV (pairwise tests go to <stem>_pairwise.csv)")
      ->required();
  regression->add_option("--mode", g_mode, "U-test population: pooled (residuals) or raw")
      ->check(CLI::IsMember({"pooled", "raw"}))
      ->capture_default_str();

  // simulate-mse
  spectrahack::shrink::PopulationSpec pop;
  std::vector<std::size_t> s_sizes = {512, 2048, 8192};
  std::size_t s_trials = 500;
  std::uint64_t s_seed = 0;
  spectrahack::shrink::SimOptions s_opts;
  std::string s_out;
  auto* sim = app.add_subcommand("simulate-mse", "Monte Carlo MSE of LW and PCS shrinkage");
  sim->add_option("--dim", pop.dim, "Dimension")->capture_default_str();
  sim->add_option("--top", pop.top_eigenvalue, "Leading population eigenvalue")->capture_default_str();
  sim->add_option("--floor", pop.floor_eigenvalue, "Remaining eigenvalues")->capture_default_str();
  sim->add_option("--sizes", s_sizes, "Sample sizes")->delimiter(',')->capture_default_str();
  sim->add_option("--trials", s_trials, "Trials per size")->capture_default_str();
  sim->add_option("--seed", s_seed, "Seed")->capture_default_str();
  sim->add_option("--lw-constant", s_opts.lw_rate_constant, "LW intensity = c / |V|")
      ->capture_default_str();
  sim->add_option("--pcs-constant", s_opts.pcs_rate_constant, "PCS intensity = c / sqrt(|V|)")
      ->capture_default_str();
  sim->add_option("--threads", threads, "Worker threads, 0 = all cores")->capture_default_str();
  sim->add_option("--out", s_out, "Results CSV (also <stem>_scaling.csv, <stem>_paired.csv)")
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::string msg = e.what();
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    std::cerr << "error code=InvalidArgument msg=" << msg << '\n';
    return 2;
  }

  try {
    if (*metrics) {
      auto config = base_config("");
      config.alpha = m_alpha;
      config.beta = m_beta;
      if (!m_razor.empty()) config.razor = parse_razor(json_argument(m_razor, "razor"));
      const auto report = spectrahack::evaluate_matrix(spectrahack::read_matrix_auto(m_input), config);
      write_file(m_out, json(report).dump(2) + "\n");
    } else if (*pipeline) {
      auto config = base_config(p_config);
      config.threads = resolve_threads(threads);
      const auto report = spectrahack::run_pipeline(spectrahack::load_manifest(p_manifest), config);
      spectrahack::write_batch_outputs(report, p_out);
    } else if (*meta) {
      const auto rows = spectrahack::meta_eval(spectrahack::load_reports(e_reports),
                                               spectrahack::read_score_table(e_scores));
      write_file(e_out, spectrahack::correlation_csv(rows));
      write_file(sibling(e_out, ".json"), spectrahack::correlation_json(rows).dump(2) + "\n");
    } else if (*razor) {
      auto config = base_config(r_config);
      config.threads = resolve_threads(threads);
      const json arr = json_argument(r_razors, "razors");
      if (!arr.is_array()) throw Error(ErrorCode::ParseFailure, "razors must be a JSON array");
      std::vector<spectrahack::RazorConfig> razors;
      for (const auto& r : arr) razors.push_back(parse_razor(r));
      const auto report = spectrahack::compare_razors(spectrahack::load_manifest(r_manifest), config,
                                                      razors, r_dirs);
      spectrahack::write_razor_outputs(report, r_out);
    } else if (*regression) {
      const auto mode = g_mode == "raw" ? spectrahack::UTestMode::RawCompression
                                        : spectrahack::UTestMode::PooledResidual;
      const auto report = spectrahack::regression_report(spectrahack::load_reports(g_reports), mode);
      write_file(g_out, spectrahack::regression_fits_csv(report));
      write_file(sibling(g_out, "_pairwise.csv"), spectrahack::regression_pairwise_csv(report));
    } else if (*sim) {
      s_opts.threads = resolve_threads(threads);
      const auto results = spectrahack::shrink::simulate_mse(pop, s_sizes, s_trials, s_seed, s_opts);
      write_file(s_out, simulation_csv(results));

      std::ostringstream paired;
      paired << "sample_size,pcs_wins,trials,sign_test_p\n";
      for (const auto& c : spectrahack::shrink::compare_pcs_lw(results)) {
        paired << c.sample_size << ',' << c.pcs_wins << ',' << c.trials << ','
               << spectrahack::format_double(c.sign_test_p) << '\n';
      }
      write_file(sibling(s_out, "_paired.csv"), paired.str());

      // The slope fit needs three sizes; with fewer, skip it rather than fail.
      if (s_sizes.size() >= 3) {
        std::ostringstream scaling;
        scaling << "estimator,points,slope,intercept,r_squared\n";
        for (const auto& row : spectrahack::shrink::mse_scaling_report(results)) {
          scaling << to_string(row.estimator) << ',' << row.points << ','
                  << spectrahack::format_double(row.slope) << ','
                  << spectrahack::format_double(row.intercept) << ','
                  << spectrahack::format_double(row.r_squared) << '\n';
        }
        write_file(sibling(s_out, "_scaling.csv"), scaling.str());
      }
    }
  } catch (const Error& e) {
    std::cerr << e.one_line() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::string msg = e.what();
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    std::cerr << "error code=IoFailure msg=" << msg << '\n';
    return 1;
  }
  return 0;
}
