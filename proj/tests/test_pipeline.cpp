#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <numeric>

#include "doctest.h"
#include "spectrahack/error.hpp"
#include "spectrahack/pipeline.hpp"
#include "test_support.hpp"

using namespace spectrahack;
using namespace spectrahack::testing;
using doctest::Approx;
using nlohmann::json;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::InvalidArgument;
}

std::vector<double> decaying(std::size_t d, double rate) {
  std::vector<double> v(d);
  for (std::size_t i = 0; i < d; ++i) v[i] = std::exp(-rate * static_cast<double>(i));
  return v;
}

std::vector<RawMatrix> batch(std::size_t count, std::size_t rows, std::size_t d, double rate,
                             std::uint64_t seed) {
  std::vector<RawMatrix> out;
  for (std::size_t i = 0; i < count; ++i) out.push_back(gaussian_rows(rows, decaying(d, rate), seed + i));
  return out;
}

std::vector<std::string> names(std::size_t n) {
  std::vector<std::string> v;
  for (std::size_t i = 0; i < n; ++i) v.push_back("s" + std::to_string(i));
  return v;
}

BatchReport fake_report(const std::string& id, double c_de, double anis) {
  BatchReport r;
  r.model_id = id;
  r.aggregate.c_de = c_de;
  r.aggregate.anisotropy = anis;
  return r;
}

ScoreTable score(const std::string& id, std::map<std::string, double> truth,
                 std::map<std::string, double> metrics = {}) {
  ScoreTable s;
  s.model_id = id;
  s.ground_truth = std::move(truth);
  s.metric_values = std::move(metrics);
  return s;
}

const CorrelationRow& row(const std::vector<CorrelationRow>& rows, const std::string& metric,
                          const std::string& bench) {
  for (const auto& r : rows)
    if (r.metric == metric && r.benchmark == bench) return r;
  FAIL("missing row " << metric << "/" << bench);
  return rows.front();
}

}  // namespace

TEST_CASE("manifest parsing") {
  const auto m = manifest_from_json(json::parse(R"({"model_id":"m","samples":["a.emb","/abs/b.emb"]})"),
                                    "/base");
  CHECK(m.model_id == "m");
  CHECK(m.sample_paths[0] == std::filesystem::path("/base/a.emb"));
  CHECK(m.sample_paths[1] == std::filesystem::path("/abs/b.emb"));
  CHECK(m.batch_size == 2);
  CHECK(manifest_from_json(manifest_to_json(m), "/elsewhere").sample_paths == m.sample_paths);
  CHECK(code_of([] {
          manifest_from_json(json::parse(R"({"model_id":"m","samples":["a"],"batch_size":2})"), ".");
        }) == ErrorCode::InvalidArgument);
  CHECK(code_of([] { manifest_from_json(json::parse(R"({"samples":["a"]})"), "."); }) ==
        ErrorCode::ParseFailure);
  CHECK(code_of([] { load_manifest("/nonexistent/manifest.json"); }) == ErrorCode::IoFailure);
}

TEST_CASE("config round trip and validation") {
  PipelineConfig c;
  c.alpha = 1e-6;
  c.beta = 0.5;
  c.n_samples = 10;
  c.seed = 42;
  c.metrics = MetricSet{}.add(Metric::DE).add(Metric::PCS);
  c.razor = RazorConfig{RazorKind::LWShrinkage, 0.9, 0.1, std::nullopt};
  const json j = c;
  CHECK(j["metrics"] == json::array({"c_de", "c_pcs"}));
  CHECK_FALSE(j.contains("threads"));
  const auto back = j.get<PipelineConfig>();
  CHECK(back.alpha == c.alpha);
  CHECK(back.beta == c.beta);
  CHECK(back.metrics == c.metrics);
  CHECK(back.razor == c.razor);
  CHECK(json(back) == j);

  const auto defaults = json::object().get<PipelineConfig>();
  CHECK(defaults.n_samples == kDefaultSampleCount);
  CHECK(defaults.beta == kDefaultBeta);
  CHECK(code_of([] { json{{"beta", 1.5}}.get<PipelineConfig>(); }) == ErrorCode::BetaOutOfRange);
  CHECK(code_of([] { json{{"metrics", {"nope"}}}.get<PipelineConfig>(); }) == ErrorCode::ParseFailure);
}

TEST_CASE("seed environment override") {
  PipelineConfig c;
  c.seed = 3;
  ::unsetenv(kSeedEnvVar);
  apply_env_overrides(c);
  CHECK(c.seed == 3);
  ::setenv(kSeedEnvVar, "1234", 1);
  apply_env_overrides(c);
  CHECK(c.seed == 1234);
  ::setenv(kSeedEnvVar, "12x", 1);
  CHECK(code_of([&] { apply_env_overrides(c); }) == ErrorCode::ParseFailure);
  ::unsetenv(kSeedEnvVar);
}

TEST_CASE("single-sample batch aggregates to that sample") {
  const auto samples = batch(1, 200, 8, 0.3, 1);
  const auto report = run_pipeline_on("m", samples, names(1), PipelineConfig{});
  CHECK(report.aggregate == report.per_sample[0]);
  CHECK(report.per_sample[0] == evaluate_matrix(samples[0], PipelineConfig{}));
  CHECK(report.convergence.size() == 5);
}

TEST_CASE("identical samples give a flat convergence series") {
  const auto one = batch(1, 150, 6, 0.5, 2);
  const std::vector<RawMatrix> samples(4, one[0]);
  const auto report = run_pipeline_on("m", samples, names(4), PipelineConfig{});
  for (const auto& [metric, series] : report.convergence) {
    CHECK(series.sample_counts == std::vector<std::size_t>{1, 2, 3, 4});
    for (double v : series.cumulative_means) CHECK(v == Approx(series.cumulative_means[0]).epsilon(1e-14));
  }
}

TEST_CASE("aggregate is invariant to sample order") {
  auto samples = batch(6, 120, 8, 0.4, 10);
  const auto a = run_pipeline_on("m", samples, names(6), PipelineConfig{});
  std::reverse(samples.begin(), samples.end());
  std::rotate(samples.begin(), samples.begin() + 2, samples.end());
  const auto b = run_pipeline_on("m", samples, names(6), PipelineConfig{});
  for (Metric m : kAllMetrics) CHECK(*a.aggregate.get(m) == Approx(*b.aggregate.get(m)).epsilon(1e-12));
}

TEST_CASE("metric subset and beta-zero razor") {
  const auto samples = batch(2, 100, 8, 0.4, 20);
  PipelineConfig subset;
  subset.metrics = MetricSet{}.add(Metric::SE);
  const auto r = run_pipeline_on("m", samples, names(2), subset);
  CHECK(r.aggregate.c_se.has_value());
  CHECK_FALSE(r.aggregate.c_de.has_value());
  CHECK(r.convergence.size() == 1);

  PipelineConfig razored;
  razored.razor = RazorConfig{RazorKind::PCS, 0.0, std::nullopt, std::nullopt};
  const auto plain = run_pipeline_on("m", samples, names(2), PipelineConfig{});
  const auto zero = run_pipeline_on("m", samples, names(2), razored);
  for (Metric m : kAllMetrics) CHECK(*zero.aggregate.get(m) == Approx(*plain.aggregate.get(m)).epsilon(1e-10));
}

TEST_CASE("batch outputs are deterministic across runs and thread counts") {
  const auto dir = fresh_dir("pipeline_det");
  const auto manifest = write_batch(dir / "in", "det", batch(5, 90, 12, 0.2, 30));
  PipelineConfig c;
  c.seed = 9;
  const auto m = load_manifest(manifest);
  write_batch_outputs(run_pipeline(m, c), dir / "a");
  write_batch_outputs(run_pipeline(m, c), dir / "b");
  c.threads = 3;
  write_batch_outputs(run_pipeline(m, c), dir / "c");
  const auto ref = slurp(dir / "a" / "batch_report.json");
  CHECK_FALSE(ref.empty());
  CHECK(slurp(dir / "b" / "batch_report.json") == ref);
  CHECK(slurp(dir / "c" / "batch_report.json") == ref);
  CHECK(slurp(dir / "c" / "convergence.csv") == slurp(dir / "a" / "convergence.csv"));

  const auto reports = load_reports(dir / "a");
  REQUIRE(reports.size() == 1);
  CHECK(batch_report_json(reports[0]) == ref);
}

TEST_CASE("batch size and n_samples cap the processed samples") {
  const auto dir = fresh_dir("pipeline_cap");
  write_batch(dir, "cap", batch(4, 60, 5, 0.3, 40));
  auto m = load_manifest(dir / "manifest.json");
  m.batch_size = 3;
  PipelineConfig c;
  CHECK(run_pipeline(m, c).per_sample.size() == 3);
  c.n_samples = 2;
  CHECK(run_pipeline(m, c).per_sample.size() == 2);
}

TEST_CASE("failures are attributed to samples") {
  auto samples = batch(3, 50, 6, 0.3, 50);
  samples.push_back(gaussian_rows(50, decaying(7, 0.3), 99));
  try {
    run_pipeline_on("m", samples, names(4), PipelineConfig{});
    FAIL("expected DimMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DimMismatch);
    CHECK(e.index() == std::optional<std::size_t>(3));
  }
  std::vector<double> zero_row(6 * 50, 1.0);
  std::fill(zero_row.begin() + 12, zero_row.begin() + 18, 0.0);
  auto bad = batch(2, 50, 6, 0.3, 60);
  bad.emplace_back(50, 6, zero_row);
  try {
    run_pipeline_on("m", bad, names(3), PipelineConfig{});
    FAIL("expected ZeroRow");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ZeroRow);
    CHECK(e.index() == std::optional<std::size_t>(2));
  }
  CHECK(code_of([] { run_pipeline_on("m", {}, {}, PipelineConfig{}); }) == ErrorCode::EmptyInput);
}

TEST_CASE("meta-evaluation correlations") {
  std::vector<BatchReport> reports;
  std::vector<ScoreTable> scores;
  for (int i = 0; i < 5; ++i) {
    const std::string id = "m" + std::to_string(i);
    reports.push_back(fake_report(id, 10.0 - i, std::exp(i)));
    scores.push_back(score(id, {{"bench", 0.1 * i}, {"flat", 1.0}, {"CE", 0.2 * i}},
                           {{"extra", static_cast<double>(i * i)}}));
  }
  std::reverse(scores.begin(), scores.end());  // join is by id, not position
  const auto rows = meta_eval(reports, scores);
  CHECK(*row(rows, "c_de", "bench").spearman == Approx(-1.0));
  CHECK(*row(rows, "anisotropy", "bench").spearman == Approx(1.0));
  CHECK(*row(rows, "extra", "CE").spearman == Approx(1.0));
  CHECK_FALSE(row(rows, "c_de", "flat").spearman.has_value());
  CHECK(row(rows, "c_de", "bench").n_models == 5);
  CHECK(rows.back().benchmark == "CE");

  const auto csv = correlation_csv(rows);
  CHECK(csv.rfind("metric,benchmark,spearman,n_models\n", 0) == 0);
  CHECK(csv.find("c_de,bench,-1,5\n") != std::string::npos);
  CHECK(csv.find("c_de,flat,,5\n") != std::string::npos);
  CHECK(correlation_json(rows)["correlations"].size() == rows.size());
}

TEST_CASE("meta-evaluation error paths") {
  std::vector<BatchReport> reports = {fake_report("a", 1, 2), fake_report("b", 2, 3),
                                      fake_report("c", 3, 4)};
  std::vector<ScoreTable> scores = {score("a", {{"x", 1}}), score("b", {{"x", 2}})};
  CHECK(code_of([&] { meta_eval(reports, scores); }) == ErrorCode::JoinMiss);
  scores.push_back(score("c", {{"x", 3}}));
  CHECK(meta_eval(reports, scores).size() == 2);
  reports.pop_back();
  CHECK(code_of([&] { meta_eval(reports, scores); }) == ErrorCode::InsufficientModels);
  reports.push_back(fake_report("a", 5, 6));
  CHECK(code_of([&] { meta_eval(reports, scores); }) == ErrorCode::DuplicateModelId);
}

TEST_CASE("razor comparison invariants") {
  // Strong leading direction: a cone-like cloud after normalization.
  std::vector<double> var(12, 0.05);
  var[0] = 20.0;
  var[1] = 5.0;
  const std::vector<RawMatrix> samples = {gaussian_rows(2000, var, 70), gaussian_rows(2000, var, 71)};
  PipelineConfig c;
  c.seed = 5;
  const std::vector<RazorConfig> razors = {
      {RazorKind::PCS, 1.0, std::nullopt, std::nullopt},
      {RazorKind::Whitening, 0.9, std::nullopt, std::nullopt},
      {RazorKind::RemoveDirections, 0.9, std::nullopt, std::size_t{2}},
      {RazorKind::LWShrinkage, 0.9, 0.5, std::nullopt}};
  const auto rep = compare_razors_on("cone", samples, c, razors, 300);
  REQUIRE(rep.razors.size() == 4);
  CHECK(rep.probs.size() == 99);
  const auto& s0 = rep.razors[0].samples[0];
  CHECK(s0.eigen_quantiles_before.size() == 99);
  CHECK(*s0.metrics_after.anisotropy == Approx(1.0));

  for (const auto& s : rep.razors[1].samples)
    for (double q : s.eigen_quantiles_after) CHECK(q == Approx(1.0).epsilon(1e-6));

  for (const auto& s : rep.razors[2].samples) {
    CHECK(s.partition_after.second_order_a > 0.0);
    CHECK(*s.metrics_after.anisotropy > *s.metrics_before.anisotropy);  // removed axes hit the floor
  }
  for (const auto& s : rep.razors[3].samples) {
    CHECK(*s.metrics_after.c_de < *s.metrics_before.c_de);  // pulled toward the mean
  }
  // Directions are shared between before and after, and across razors.
  CHECK(rep.razors[0].samples[1].partition_before.mean == rep.razors[1].samples[1].partition_before.mean);

  const auto dir = fresh_dir("razor_out");
  write_razor_outputs(rep, dir);
  for (const char* f : {"razor_compare.json", "qq.csv", "partition.csv", "partition_quantiles.csv",
                        "metric_deltas.csv"}) {
    CHECK(std::filesystem::file_size(dir / f) > 0);
  }
  const auto qq = slurp(dir / "qq.csv");
  CHECK(std::count(qq.begin(), qq.end(), '\n') == 1 + 4 * 2 * 99);
  CHECK(code_of([&] { compare_razors_on("x", samples, c, {}, 10); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("removing directions disperses Z(c) on cone-shaped embeddings") {
  // Rows cluster around a shared axis; after normalization and centering the
  // cloud is nearly isotropic off-axis, so zeroing more axes spreads Z(c).
  std::mt19937_64 rng(81);
  std::normal_distribution<double> g;
  const std::size_t n = 4000, d = 16;
  std::vector<double> data(n * d);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < d; ++c) data[r * d + c] = g(rng) * (1.0 + 0.05 * c);
    data[r * d] += 6.0;
  }
  const std::vector<RawMatrix> samples = {RawMatrix(n, d, data)};
  PipelineConfig c;
  c.seed = 2;
  const auto rep = compare_razors_on(
      "cone", samples, c, {{RazorKind::RemoveDirections, 0.9, std::nullopt, std::size_t{3}}}, 2000);
  const auto& s = rep.razors[0].samples[0];
  CHECK(s.partition_after.std > s.partition_before.std);
}

TEST_CASE("regression report on an exact log-linear relation") {
  std::vector<BatchReport> reports;
  for (int m = 0; m < 3; ++m) {
    BatchReport r;
    r.model_id = "m" + std::to_string(m);
    for (int i = 0; i < 8; ++i) {
      MetricReport s;
      const double a = 1.5 + i + 0.3 * m;
      s.anisotropy = a;
      s.c_de = (1.0 + m) * std::log(a) + 2.0 * m;
      r.per_sample.push_back(s);
    }
    reports.push_back(r);
  }
  const auto rep = regression_report(reports);
  REQUIRE(rep.fits.size() == 3);
  for (int m = 0; m < 3; ++m) {
    CHECK(rep.fits[m].fit.slope == Approx(1.0 + m).epsilon(1e-10));
    CHECK(rep.fits[m].fit.r_squared >= 1.0 - 1e-10);
    CHECK(rep.fits[m].stars == "****");
  }
  CHECK(rep.pairwise.size() == 3);
  CHECK(rep.pairwise[0].model_a == "m0");
  CHECK(rep.pairwise[0].model_b == "m1");
  CHECK(regression_fits_csv(rep).rfind("model_id,n,slope,intercept,r_squared,p_value,stars\n", 0) == 0);
  const auto pairwise = regression_pairwise_csv(rep);
  CHECK(std::count(pairwise.begin(), pairwise.end(), '\n') == 4);
}

TEST_CASE("regression calibration: one generator gives no significant differences") {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> noise(0.0, 0.05);
  std::uniform_real_distribution<double> la(0.5, 3.0);
  std::size_t significant = 0, total = 0;
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<BatchReport> reports;
    for (int m = 0; m < 3; ++m) {
      BatchReport r;
      r.model_id = "m" + std::to_string(m);
      for (int i = 0; i < 25; ++i) {
        MetricReport s;
        const double x = la(rng);
        s.anisotropy = std::exp(x);
        s.c_de = 1.7 * x + 0.4 + noise(rng);
        r.per_sample.push_back(s);
      }
      reports.push_back(r);
    }
    for (const auto& p : regression_report(reports).pairwise) {
      significant += p.test.p_value < 0.05;
      ++total;
    }
  }
  // Nominal false-positive rate is 5%; allow generous slack for 60 tests.
  CHECK(significant <= total / 5);
}
