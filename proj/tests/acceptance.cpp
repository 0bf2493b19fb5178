// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails. Every check compares library output against an
// independent recomputation or a construction whose answer is known.

#include <Eigen/Dense>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "spectrahack/error.hpp"
#include "spectrahack/metrics.hpp"
#include "spectrahack/pipeline.hpp"
#include "spectrahack/razors.hpp"
#include "spectrahack/shrink_sim.hpp"
#include "spectrahack/spectra.hpp"
#include "spectrahack/stats.hpp"
#include "test_support.hpp"

using namespace spectrahack;
using spectrahack::testing::gaussian_rows;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

int g_failures = 0;

void run(const char* name, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome out;
  try {
    out = body();
  } catch (const Error& e) {
    out = {false, "unexpected " + e.one_line()};
  } catch (const std::exception& e) {
    out = {false, std::string("unexpected exception: ") + e.what()};
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (!out.pass) ++g_failures;
  std::printf("%s %-26s %s (%.2fs)\n", out.pass ? "PASS" : "FAIL", name, out.detail.c_str(), secs);
  std::fflush(stdout);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double rel_err(long double got, long double want) {
  const long double denom = std::max(std::abs(want), 1e-300L);
  return static_cast<double>(std::abs(got - want) / denom);
}

// ------------------------------------------------------------------ oracles

// Definitions evaluated term by term in long double, descending input.
struct DefinitionOracle {
  long double c_de = 0, c_se = 0, anis = 0, cv = 0, c_pcs = 0;
};

DefinitionOracle definitions(const std::vector<double>& desc, double beta) {
  DefinitionOracle o;
  const long double top = desc.front();
  const long double bottom = desc.back();
  for (double v : desc) {
    const long double l = v;
    o.c_de -= 0.5L * std::log(l);
    o.c_se -= l * std::log(l);
    o.c_pcs -= 0.5L * std::log((1.0L - beta) * l + beta * top);
  }
  o.anis = top / bottom;
  o.cv = o.anis / o.c_de;
  return o;
}

// Dense Cholesky written out longhand: log det = 2 sum log L_ii.
double cholesky_logdet(const Eigen::MatrixXd& a) {
  const Eigen::Index n = a.rows();
  std::vector<long double> l(static_cast<std::size_t>(n * n), 0.0L);
  long double logdet = 0;
  for (Eigen::Index j = 0; j < n; ++j) {
    long double diag = a(j, j);
    for (Eigen::Index k = 0; k < j; ++k) diag -= l[j * n + k] * l[j * n + k];
    if (diag <= 0) return std::nan("");
    const long double ljj = std::sqrt(diag);
    l[j * n + j] = ljj;
    logdet += 2.0L * std::log(ljj);
    for (Eigen::Index i = j + 1; i < n; ++i) {
      long double s = a(i, j);
      for (Eigen::Index k = 0; k < j; ++k) s -= l[i * n + k] * l[j * n + k];
      l[i * n + j] = s / ljj;
    }
  }
  return static_cast<double>(logdet);
}

// Average ranks by counting, O(n^2).
std::vector<double> counting_ranks(const std::vector<double>& v) {
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    double less = 0, equal = 0;
    for (double w : v) {
      less += w < v[i];
      equal += w == v[i];
    }
    r[i] = 1.0 + less + (equal - 1.0) / 2.0;
  }
  return r;
}

double rank_oracle_spearman(const std::vector<double>& x, const std::vector<double>& y) {
  const auto rx = counting_ranks(x), ry = counting_ranks(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

// Two-sided exact U p-value by listing every split of the pooled values.
double hand_enumerated_u_p(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> pooled = a;
  pooled.insert(pooled.end(), b.begin(), b.end());
  const std::size_t n = pooled.size(), n1 = a.size();
  auto u_count = [&](unsigned mask) {
    double u = 0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if ((mask >> i & 1u) && !(mask >> j & 1u) && pooled[i] > pooled[j]) u += 1;
    return u;
  };
  const double nn = static_cast<double>(a.size() * b.size());
  const unsigned observed = (1u << n1) - 1u;
  const double u_obs = std::min(u_count(observed), nn - u_count(observed));
  double hits = 0, total = 0;
  for (unsigned mask = 0; mask < (1u << n); ++mask) {
    if (static_cast<std::size_t>(__builtin_popcount(mask)) != n1) continue;
    const double u = u_count(mask);
    hits += std::min(u, nn - u) <= u_obs;
    total += 1;
  }
  return hits / total;
}

// -------------------------------------------------------------- generators

std::vector<double> log_uniform_desc(std::size_t d, double lo, double hi, std::mt19937_64& rng) {
  return spectrahack::testing::random_spectrum(d, lo, hi, rng);
}

Eigen::MatrixXd random_spd(std::size_t d, std::mt19937_64& rng) {
  const Eigen::MatrixXd q = spectrahack::testing::random_orthogonal(d, rng);
  const auto eig = log_uniform_desc(d, 1e-3, 1e2, rng);
  Eigen::VectorXd e(static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < d; ++i) e(static_cast<Eigen::Index>(i)) = eig[i];
  Eigen::MatrixXd m = q * e.asDiagonal() * q.transpose();
  return 0.5 * (m + m.transpose());
}

// ---------------------------------------------------------------- criteria

Outcome metric_formula_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(101);
  std::uniform_int_distribution<std::size_t> dim(2, 64);
  std::uniform_real_distribution<double> beta_dist(0.0, 1.0);
  double worst = 0.0;
  for (int t = 0; t < 1000; ++t) {
    // Normalized-embedding covariances have eigenvalues in (0, 1].
    const auto eig = log_uniform_desc(dim(rng), 1e-6, 1.0, rng);
    const double beta = t % 5 == 0 ? kDefaultBeta : beta_dist(rng);
    const auto want = definitions(eig, beta);
    worst = std::max({worst, rel_err(compression_de(eig), want.c_de),
                      rel_err(compression_se(eig), want.c_se), rel_err(anisotropy(eig), want.anis),
                      rel_err(semantic_cv(eig), want.cv),
                      rel_err(compression_pcs(eig, beta), want.c_pcs)});
  }
  const double secs = seconds_since(t0);
  return {worst <= 1e-10 && secs < 10.0,
          fmt("1000 spectra, max rel err %.2e (tol 1e-10), %.2fs (limit 10s)", worst, secs)};
}

Outcome logdet_consistency() {
  std::mt19937_64 rng(202);
  std::uniform_int_distribution<std::size_t> dim(2, 64);
  double worst = 0.0;
  for (int t = 0; t < 200; ++t) {
    const std::size_t d = dim(rng);
    const Eigen::MatrixXd a = random_spd(d, rng);
    const auto spec = decompose_symmetric(a, 1e-300, d);
    double sum_log = 0.0;
    for (double v : spec.eigenvalues) sum_log += std::log(v);
    worst = std::max(worst, rel_err(sum_log, cholesky_logdet(a)));
  }
  return {worst <= 1e-6, fmt("200 SPD matrices, max rel err %.2e (tol 1e-6)", worst)};
}

Outcome razor_invariants() {
  std::mt19937_64 rng(303);
  bool ok = true;
  std::string detail;
  for (int t = 0; t < 50; ++t) {
    auto spec = spectrahack::testing::spectrum_of(log_uniform_desc(2 + t, 1e-5, 1.0, rng), 100);
    const double a_pcs = anisotropy(apply_pcs(spec, 1.0).spectrum_after);
    const double a_lw = anisotropy(apply_lw(spec, 1.0).spectrum_after);
    if (a_pcs != 1.0 || a_lw != 1.0) ok = false;
    for (double beta : {0.0, 0.25, 0.5, 0.75, 0.9, 1.0}) {
      if (apply_pcs(spec, beta).spectrum_after.top() != spec.top()) ok = false;
      if (pcs_smooth(spec.eigenvalues, beta).front() != spec.top()) ok = false;
    }
  }
  detail += ok ? "PCS/LW anisotropy == 1 and PCS top fixed for all beta" : "exact invariant broken";

  std::vector<double> var(16);
  for (std::size_t i = 0; i < var.size(); ++i) var[i] = 4.0 - 0.2 * static_cast<double>(i);
  const EmbeddingMatrix emb = preprocess(gaussian_rows(10000, var, 304));
  const auto white = apply_whitening(emb, kDefaultAlpha);
  const auto& z = white.embedding_after->values();
  double dev = 0.0;
  for (Eigen::Index i = 0; i < z.cols(); ++i) {
    for (Eigen::Index j = 0; j < z.cols(); ++j) {
      long double s = 0;
      for (Eigen::Index r = 0; r < z.rows(); ++r) s += z(r, i) * z(r, j);
      const double c = static_cast<double>(s / z.rows());
      dev = std::max(dev, std::abs(c - (i == j ? 1.0 : 0.0)));
    }
  }
  ok = ok && dev < 1e-6;
  detail += fmt("; whitened cov max-abs dev %.2e (tol 1e-6)", dev);
  return {ok, detail};
}

Outcome second_order_validity() {
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<double> var(8);
  for (std::size_t i = 0; i < var.size(); ++i) var[i] = 3.0 - 0.25 * static_cast<double>(i);
  const EmbeddingMatrix emb = preprocess(gaussian_rows(20000, var, 405));
  const auto spec = covariance(emb);
  const double cond = anisotropy(spec);
  const auto diag = partition_diagnostic(emb, spec, 10000, 406);
  const double ratio = diag.second_order_a / diag.sampled_ratio();
  const double secs = seconds_since(t0);
  return {cond <= 10.0 && std::abs(ratio - 1.0) <= 0.05 && secs < 60.0,
          fmt("cond %.2f, estimate %.6f vs sampled max/min %.6f (%+.2f%%, tol 5%%), %.1fs",
              cond, diag.second_order_a, diag.sampled_ratio(), 100.0 * (ratio - 1.0), secs)};
}

Outcome shrinkage_comparison() {
  const auto t0 = std::chrono::steady_clock::now();
  const shrink::PopulationSpec pop{32, 100.0, 0.01};
  const std::vector<std::size_t> sizes = {2048};
  const auto results = shrink::simulate_mse(pop, sizes, 500, 2048);
  const auto& lw = results[0];
  const auto& pcs = results[1];
  const auto cmp = shrink::compare_pcs_lw(results).front();
  double closure = 0.0;
  for (const auto& r : results) {
    closure = std::max(closure, std::abs(r.bias_sq + r.variance - r.mean_frobenius_mse) /
                                    r.mean_frobenius_mse);
  }
  const double secs = seconds_since(t0);
  const bool ordering = pcs.mean_frobenius_mse < lw.mean_frobenius_mse && cmp.sign_test_p < 0.05;
  return {ordering && closure <= 0.05 && secs < 300.0,
          fmt("MSE PCS %.3f (bias^2 %.3f) vs LW %.3f; PCS wins %zu/%zu, sign-test p=%.3g; "
              "decomposition gap %.1e (tol 5%%), %.1fs",
              pcs.mean_frobenius_mse, pcs.bias_sq, lw.mean_frobenius_mse, cmp.pcs_wins,
              cmp.trials, cmp.sign_test_p, closure, secs)};
}

Outcome statistics_oracles() {
  std::mt19937_64 rng(505);
  std::size_t spearman_mismatch = 0;
  double spearman_worst = 0.0;
  for (int t = 0; t < 1000; ++t) {
    const std::size_t n = 3 + t % 40;
    std::uniform_int_distribution<int> level(0, 1 + t % 7);  // few levels: many ties
    std::vector<double> x(n), y(n);
    for (auto& v : x) v = level(rng);
    for (auto& v : y) v = level(rng);
    // A constant column has no defined correlation; break it with one bump.
    if (std::adjacent_find(x.begin(), x.end(), std::not_equal_to<>()) == x.end()) x[0] += 1.0;
    if (std::adjacent_find(y.begin(), y.end(), std::not_equal_to<>()) == y.end()) y[0] += 1.0;
    if (stats::average_ranks(x) != counting_ranks(x)) ++spearman_mismatch;
    spearman_worst =
        std::max(spearman_worst, std::abs(stats::spearman(x, y) - rank_oracle_spearman(x, y)));
  }

  std::size_t u_cases = 0;
  double u_worst = 0.0;
  std::uniform_real_distribution<double> u01(0, 1);
  for (std::size_t n1 = 1; n1 <= 5; ++n1) {
    for (std::size_t n2 = 1; n1 + n2 <= 6; ++n2) {
      // Every relative ordering of the two groups for these sizes.
      std::vector<int> labels(n1 + n2, 1);
      std::fill(labels.begin(), labels.begin() + static_cast<long>(n1), 0);
      std::sort(labels.begin(), labels.end());
      do {
        std::vector<double> a, b;
        for (std::size_t i = 0; i < labels.size(); ++i)
          (labels[i] == 0 ? a : b).push_back(static_cast<double>(i) + 0.5 * u01(rng));
        const auto r = stats::mann_whitney_u(a, b, stats::UMethodChoice::Exact);
        u_worst = std::max(u_worst, std::abs(r.p_value - hand_enumerated_u_p(a, b)));
        ++u_cases;
      } while (std::next_permutation(labels.begin(), labels.end()));
    }
  }

  std::vector<stats::AnisotropyCompression> pairs;
  for (int i = 0; i < 40; ++i) {
    const double a = std::exp(0.1 * i + 0.05);
    pairs.push_back({a, -1.3 * std::log(a) + 4.2});
  }
  const auto fit = stats::regress_compression_on_log_anisotropy(pairs);

  const bool ok = spearman_mismatch == 0 && spearman_worst <= 1e-12 && u_worst <= 1e-15 &&
                  fit.r_squared >= 1.0 - 1e-10;
  return {ok, fmt("spearman: 1000 tied inputs, rank mismatches %zu, max |diff| %.1e; exact U: "
                  "%zu tie-free cases (n1+n2<=6), max |dp| %.1e; OLS R^2 = %.15f",
                  spearman_mismatch, spearman_worst, u_cases, u_worst, fit.r_squared)};
}

// Three generators whose draws move from isotropic (t = 0) to anisotropic
// (t = 1, condition number about e^4) along differently shaped paths: two
// sinking directions, a smooth exponential decay, and two rising spikes. At a
// given anisotropy they place the bulk of the spectrum differently, so their
// compression-vs-anisotropy curves separate.
std::vector<double> family_variances(int family, double t, std::size_t d) {
  std::vector<double> v(d, 1.0);
  for (std::size_t i = 0; i < d; ++i) {
    const double x = static_cast<double>(i);
    switch (family) {
      case 0: if (i + 2 >= d) v[i] = std::exp(-4.0 * t); break;
      case 1: v[i] = std::exp(-4.0 * t * x / static_cast<double>(d - 1)); break;
      default: if (i < 2) v[i] = std::exp(4.0 * t); break;
    }
  }
  return v;
}

Outcome synchronicity() {
  constexpr std::size_t kDim = 16, kRows = 2000, kSamples = 30;
  std::vector<BatchReport> reports;
  std::mt19937_64 rng(606);
  std::uniform_real_distribution<double> t_dist(0.0, 1.0);
  for (int f = 0; f < 3; ++f) {
    std::vector<RawMatrix> samples;
    std::vector<std::string> names;
    for (std::size_t s = 0; s < kSamples; ++s) {
      samples.push_back(gaussian_rows(kRows, family_variances(f, t_dist(rng), kDim), rng()));
      names.push_back("f" + std::to_string(f) + "_" + std::to_string(s));
    }
    PipelineConfig config;
    config.metrics = MetricSet{}.add(Metric::DE).add(Metric::Anisotropy);
    reports.push_back(run_pipeline_on("family" + std::to_string(f), samples, names, config));
  }
  const auto rep = regression_report(reports);
  bool ok = true;
  std::string detail = "R^2";
  for (const auto& f : rep.fits) {
    ok = ok && f.fit.r_squared >= 0.7;
    detail += fmt(" %s=%.3f", f.model_id.c_str(), f.fit.r_squared);
  }
  detail += " (min 0.7); pairwise U p";
  for (const auto& p : rep.pairwise) {
    ok = ok && p.test.p_value < 0.01;
    detail += fmt(" %s/%s=%.1e", p.model_a.c_str() + 6, p.model_b.c_str() + 6, p.test.p_value);
  }
  return {ok, detail + " (max 0.01)"};
}

// Model k: one nuisance direction, an 8-dimensional signal subspace whose
// per-direction SNR grows with k, and a tiny isotropic floor whose level is
// deliberately unrelated to k.
std::vector<double> capability_variances(std::size_t k) {
  constexpr std::size_t kDim = 64, kSignal = 8;
  static const double kFloor[] = {1e-4, 1e-6, 1e-3, 1e-5, 3e-4, 3e-6};
  const double snr = 0.05 + 0.08 * static_cast<double>(k);
  std::vector<double> v(kDim, kFloor[k]);
  v[0] = 1.0;
  for (std::size_t i = 1; i <= kSignal; ++i) v[i] = snr;
  return v;
}

Outcome synthetic_meta_eval() {
  const auto dir = spectrahack::testing::fresh_dir("acceptance_meta");
  std::vector<BatchReport> reports;
  std::vector<ScoreTable> scores;
  PipelineConfig config;
  config.seed = 7;
  for (std::size_t k = 0; k < 6; ++k) {
    const std::string id = "model" + std::to_string(k);
    std::vector<RawMatrix> samples;
    for (std::uint64_t s = 0; s < 4; ++s) {
      samples.push_back(gaussian_rows(3000, capability_variances(k), 7000 + 10 * k + s));
    }
    const auto manifest = spectrahack::testing::write_batch(dir / id, id, samples);
    write_batch_outputs(run_pipeline(load_manifest(manifest), config), dir / "reports" / id);
    ScoreTable st;
    st.model_id = id;
    st.ground_truth["capability"] = static_cast<double>(k);
    scores.push_back(st);
  }
  const auto rows = meta_eval(load_reports(dir / "reports"), scores);
  double rho_pcs = std::nan(""), rho_de = std::nan("");
  for (const auto& r : rows) {
    if (r.benchmark != "capability" || !r.spearman) continue;
    if (r.metric == "c_pcs") rho_pcs = *r.spearman;
    if (r.metric == "c_de") rho_de = *r.spearman;
  }
  return {rho_pcs == 1.0 && rho_de < 1.0,
          fmt("Spearman(C_PCS, capability) = %.4f (want 1), Spearman(C_DE, capability) = %.4f "
              "(want < 1)", rho_pcs, rho_de)};
}

Outcome pipeline_determinism() {
  const auto dir = spectrahack::testing::fresh_dir("acceptance_determinism");
  std::vector<RawMatrix> samples;
  for (std::uint64_t s = 0; s < 12; ++s) {
    samples.push_back(gaussian_rows(400 + 37 * s, family_variances(static_cast<int>(s % 3), 0.6, 24),
                                    900 + s));
  }
  const auto manifest = load_manifest(spectrahack::testing::write_batch(dir / "in", "det", samples));
  PipelineConfig config;
  config.seed = 99;
  config.razor = RazorConfig{RazorKind::RemoveDirections, kDefaultBeta, std::nullopt, std::nullopt};
  write_batch_outputs(run_pipeline(manifest, config), dir / "serial1");
  write_batch_outputs(run_pipeline(manifest, config), dir / "serial2");
  config.threads = 4;
  write_batch_outputs(run_pipeline(manifest, config), dir / "parallel");
  const auto ref = spectrahack::testing::slurp(dir / "serial1" / "batch_report.json");
  const bool same_runs = spectrahack::testing::slurp(dir / "serial2" / "batch_report.json") == ref;
  const bool same_threads = spectrahack::testing::slurp(dir / "parallel" / "batch_report.json") == ref;
  return {!ref.empty() && same_runs && same_threads,
          fmt("batch_report.json (%zu bytes): run-to-run %s, serial-vs-4-threads %s", ref.size(),
              same_runs ? "identical" : "DIFFERENT", same_threads ? "identical" : "DIFFERENT")};
}

}  // namespace

int main() {
  run("metric-formula-oracle", metric_formula_oracle);
  run("logdet-consistency", logdet_consistency);
  run("razor-invariants", razor_invariants);
  run("second-order-anisotropy", second_order_validity);
  run("shrinkage-comparison", shrinkage_comparison);
  run("statistics-oracles", statistics_oracles);
  run("synchronicity", synchronicity);
  run("synthetic-meta-eval", synthetic_meta_eval);
  run("pipeline-determinism", pipeline_determinism);
  std::printf("%d criteria failed\n", g_failures);
  return g_failures == 0 ? 0 : 1;
}
