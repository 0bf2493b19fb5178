#include "spectrahack/stats.hpp"

#include <algorithm>
#include <bit>
#include <boost/math/distributions/binomial.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <cstdint>
#include <numeric>

#include "spectrahack/error.hpp"

namespace spectrahack::stats {
namespace {

void require_same_length(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) {
    throw Error(ErrorCode::LengthMismatch, "inputs have lengths " + std::to_string(x.size()) +
                                               " and " + std::to_string(y.size()));
  }
}

bool is_constant(std::span<const double> x) {
  return std::adjacent_find(x.begin(), x.end(), std::not_equal_to<>()) == x.end();
}

double mean_of(std::span<const double> x) {
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

}  // namespace

std::vector<double> average_ranks(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i + 1;
    while (j < n && values[order[j]] == values[order[i]]) ++j;
    // positions i..j-1 (0-based) share rank mean of (i+1 .. j)
    const double avg = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) ranks[order[k]] = avg;
    i = j;
  }
  return ranks;
}

double pearson(std::span<const double> x, std::span<const double> y) {
  require_same_length(x, y);
  if (x.size() < 2) throw Error(ErrorCode::InvalidArgument, "need at least two points");
  if (is_constant(x) || is_constant(y)) {
    throw Error(ErrorCode::ConstantInput, "correlation undefined for constant input");
  }
  const double mx = mean_of(x);
  const double my = mean_of(y);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double spearman(std::span<const double> x, std::span<const double> y) {
  require_same_length(x, y);
  if (x.size() < 2) throw Error(ErrorCode::InvalidArgument, "need at least two points");
  if (is_constant(x) || is_constant(y)) {
    throw Error(ErrorCode::ConstantInput, "Spearman undefined for constant input");
  }
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  return pearson(rx, ry);
}

double t_two_sided_p(double t, double dof) {
  if (std::isinf(t)) return 0.0;
  const boost::math::students_t dist(dof);
  return std::clamp(2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t))), 0.0, 1.0);
}

double normal_upper_tail(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

RegressionFit ols(std::span<const double> x, std::span<const double> y) {
  require_same_length(x, y);
  const std::size_t n = x.size();
  if (n < 3) throw Error(ErrorCode::InsufficientPoints, "regression needs at least 3 points");
  const double mx = mean_of(x);
  const double my = mean_of(y);
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  if (!(sxx > 0.0)) throw Error(ErrorCode::DegenerateX, "independent variable has zero variance");
  RegressionFit fit;
  fit.n = n;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double ss_res = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = y[i] - (fit.intercept + fit.slope * x[i]);
    ss_res += r * r;
  }
  if (syy > 0.0) {
    fit.r_squared = std::clamp(1.0 - ss_res / syy, 0.0, 1.0);
  } else {
    fit.r_squared = 0.0;
  }
  const double dof = static_cast<double>(n - 2);
  const double se = std::sqrt(ss_res / dof / sxx);
  if (syy == 0.0) {
    fit.p_value = 1.0;
  } else if (se == 0.0) {
    fit.p_value = 0.0;
  } else {
    fit.p_value = t_two_sided_p(fit.slope / se, dof);
  }
  return fit;
}

RegressionFit regress_compression_on_log_anisotropy(std::span<const AnisotropyCompression> pairs) {
  std::vector<double> x, y;
  x.reserve(pairs.size());
  y.reserve(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (!(pairs[i].anisotropy > 0.0)) {
      throw Error(ErrorCode::InvalidArgument, "anisotropy must be positive", i);
    }
    x.push_back(std::log(pairs[i].anisotropy));
    y.push_back(pairs[i].compression);
  }
  return ols(x, y);
}

UTestResult mann_whitney_u(std::span<const double> a, std::span<const double> b,
                           UMethodChoice choice) {
  if (a.empty() || b.empty()) throw Error(ErrorCode::EmptySample, "both samples must be non-empty");
  const std::size_t n1 = a.size();
  const std::size_t n2 = b.size();
  const std::size_t n = n1 + n2;
  std::vector<double> pooled(a.begin(), a.end());
  pooled.insert(pooled.end(), b.begin(), b.end());
  const auto ranks = average_ranks(pooled);

  double r1 = 0.0;
  for (std::size_t i = 0; i < n1; ++i) r1 += ranks[i];
  const double nn = static_cast<double>(n1) * static_cast<double>(n2);
  const double u1 = r1 - 0.5 * static_cast<double>(n1) * static_cast<double>(n1 + 1);
  const double u = std::min(u1, nn - u1);

  std::vector<double> sorted = pooled;
  std::sort(sorted.begin(), sorted.end());
  double tie_term = 0.0;
  bool has_ties = false;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i + 1;
    while (j < n && sorted[j] == sorted[i]) ++j;
    const double t = static_cast<double>(j - i);
    if (j - i > 1) has_ties = true;
    tie_term += t * t * t - t;
    i = j;
  }

  UTestResult res;
  res.u_statistic = u;
  res.n1 = n1;
  res.n2 = n2;

  const bool exact = choice == UMethodChoice::Exact ||
                     (choice == UMethodChoice::Auto && n <= kExactUMaxTotal && !has_ties);
  if (exact) {
    if (n > 20) throw Error(ErrorCode::InvalidArgument, "exact test limited to n1 + n2 <= 20");
    // Every assignment of n1 of the pooled ranks to the first sample.
    std::uint64_t extreme = 0, total = 0;
    const double base = 0.5 * static_cast<double>(n1) * static_cast<double>(n1 + 1);
    const std::uint32_t limit = std::uint32_t{1} << n;
    for (std::uint32_t mask = 0; mask < limit; ++mask) {
      if (static_cast<std::size_t>(std::popcount(mask)) != n1) continue;
      double rs = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (mask & (std::uint32_t{1} << i)) rs += ranks[i];
      }
      const double perm_u1 = rs - base;
      const double perm_u = std::min(perm_u1, nn - perm_u1);
      ++total;
      if (perm_u <= u + 1e-9) ++extreme;
    }
    res.method = UMethod::Exact;
    res.p_value = static_cast<double>(extreme) / static_cast<double>(total);
    return res;
  }

  res.method = UMethod::NormalApprox;
  const double nd = static_cast<double>(n);
  const double mu = 0.5 * nn;
  const double var = nn / 12.0 * ((nd + 1.0) - tie_term / (nd * (nd - 1.0)));
  if (!(var > 0.0)) {
    res.p_value = 1.0;
    return res;
  }
  const double z = std::max(0.0, std::abs(u - mu) - 0.5) / std::sqrt(var);
  res.p_value = std::clamp(2.0 * normal_upper_tail(z), 0.0, 1.0);
  return res;
}

ConvergenceSeries convergence_series(std::span<const double> values) {
  if (values.empty()) throw Error(ErrorCode::EmptyInput, "no values");
  ConvergenceSeries s;
  s.sample_counts.reserve(values.size());
  s.cumulative_means.reserve(values.size());
  double sum = 0.0;
  for (std::size_t k = 0; k < values.size(); ++k) {
    sum += values[k];
    s.sample_counts.push_back(k + 1);
    s.cumulative_means.push_back(sum / static_cast<double>(k + 1));
  }
  return s;
}

std::string significance_stars(double p) {
  if (p < 1e-4) return "****";
  if (p < 1e-3) return "***";
  if (p < 1e-2) return "**";
  if (p < 5e-2) return "*";
  return "ns";
}

double sign_test_upper_p(std::size_t successes, std::size_t trials) {
  if (successes > trials) throw Error(ErrorCode::InvalidArgument, "successes exceed trials");
  if (successes == 0) return 1.0;
  const boost::math::binomial dist(static_cast<double>(trials), 0.5);
  return boost::math::cdf(boost::math::complement(dist, static_cast<double>(successes - 1)));
}

}  // namespace spectrahack::stats
