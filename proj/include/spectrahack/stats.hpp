#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace spectrahack::stats {

// 1-based ranks; tied values share the average of their positions.
std::vector<double> average_ranks(std::span<const double> values);

double pearson(std::span<const double> x, std::span<const double> y);

// Pearson correlation of average ranks.
double spearman(std::span<const double> x, std::span<const double> y);

struct RegressionFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  double p_value = 1.0;  // two-sided, slope t-test with n - 2 dof
  std::size_t n = 0;
};

// Ordinary least squares of y on x.
RegressionFit ols(std::span<const double> x, std::span<const double> y);

struct AnisotropyCompression {
  double anisotropy;
  double compression;
};

// OLS of compression on log(anisotropy).
RegressionFit regress_compression_on_log_anisotropy(std::span<const AnisotropyCompression> pairs);

enum class UMethod { Exact, NormalApprox };
enum class UMethodChoice { Auto, Exact, NormalApprox };

struct UTestResult {
  double u_statistic = 0.0;  // min(U1, U2)
  double p_value = 1.0;      // two-sided
  std::size_t n1 = 0;
  std::size_t n2 = 0;
  UMethod method = UMethod::Exact;
};

inline constexpr std::size_t kExactUMaxTotal = 12;

// Auto uses exact enumeration when n1 + n2 <= 12 and there are no ties,
// otherwise the normal approximation with tie and continuity corrections.
// Forcing Exact with ties enumerates over the tied average ranks.
UTestResult mann_whitney_u(std::span<const double> a, std::span<const double> b,
                           UMethodChoice choice = UMethodChoice::Auto);

struct ConvergenceSeries {
  std::vector<std::size_t> sample_counts;
  std::vector<double> cumulative_means;
};

ConvergenceSeries convergence_series(std::span<const double> per_sample_values);

// "****" p<1e-4, "***" p<1e-3, "**" p<1e-2, "*" p<5e-2, else "ns".
std::string significance_stars(double p);

// P(X >= successes) for X ~ Binomial(trials, 1/2).
double sign_test_upper_p(std::size_t successes, std::size_t trials);

// Two-sided p-value of a t statistic with `dof` degrees of freedom.
double t_two_sided_p(double t, double dof);

double normal_upper_tail(double z);

}  // namespace spectrahack::stats
