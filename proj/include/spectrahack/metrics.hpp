#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "spectrahack/spectra.hpp"

namespace spectrahack {

inline constexpr double kDefaultBeta = 0.9;
inline constexpr double kCvEpsilon = 1e-12;

// Metric functions take the descending eigenvalue list of a regularized
// covariance. All logarithms are natural.

// -1/2 sum log lambda_d
double compression_de(std::span<const double> eigenvalues);
// lambda_max / lambda_min
double anisotropy(std::span<const double> eigenvalues);
// -sum lambda_d log lambda_d
double compression_se(std::span<const double> eigenvalues);
// anisotropy / compression_de; throws DegenerateCompression when
// |compression_de| <= kCvEpsilon. The sign of compression_de is kept.
double semantic_cv(std::span<const double> eigenvalues);
// compression_de after lambda'_d = (1 - beta) lambda_d + beta lambda_max.
double compression_pcs(std::span<const double> eigenvalues, double beta = kDefaultBeta);

inline double compression_de(const CovarianceSpectrum& s) { return compression_de(s.eigenvalues); }
inline double anisotropy(const CovarianceSpectrum& s) { return anisotropy(s.eigenvalues); }
inline double compression_se(const CovarianceSpectrum& s) { return compression_se(s.eigenvalues); }
inline double semantic_cv(const CovarianceSpectrum& s) { return semantic_cv(s.eigenvalues); }
inline double compression_pcs(const CovarianceSpectrum& s, double beta = kDefaultBeta) {
  return compression_pcs(s.eigenvalues, beta);
}

// Smoothed eigenvalues used by compression_pcs and the PCS razor.
std::vector<double> pcs_smooth(std::span<const double> eigenvalues, double beta);

enum class Metric : unsigned { DE = 1u, SE = 2u, CV = 4u, PCS = 8u, Anisotropy = 16u };

class MetricSet {
 public:
  constexpr MetricSet() = default;
  static constexpr MetricSet all() {
    MetricSet s;
    s.bits_ = 31u;
    return s;
  }
  constexpr MetricSet& add(Metric m) {
    bits_ |= static_cast<unsigned>(m);
    return *this;
  }
  constexpr bool contains(Metric m) const { return (bits_ & static_cast<unsigned>(m)) != 0; }
  constexpr bool empty() const { return bits_ == 0; }
  friend constexpr bool operator==(MetricSet, MetricSet) = default;

 private:
  unsigned bits_ = 0;
};

const char* metric_name(Metric m);  // "c_de", "c_se", "semantic_cv", "c_pcs", "anisotropy"
std::optional<Metric> metric_from_name(std::string_view name);
inline constexpr Metric kAllMetrics[] = {Metric::DE, Metric::Anisotropy, Metric::SE, Metric::CV,
                                         Metric::PCS};

// Values are present exactly for the metrics that were requested.
struct MetricReport {
  std::optional<double> c_de;
  std::optional<double> anisotropy;
  std::optional<double> c_se;
  std::optional<double> semantic_cv;
  std::optional<double> c_pcs;
  double alpha = kDefaultAlpha;
  double beta = kDefaultBeta;

  std::optional<double> get(Metric m) const;
  void set(Metric m, double value);
  friend bool operator==(const MetricReport&, const MetricReport&) = default;
};

MetricReport compute_metrics(std::span<const double> eigenvalues, double alpha, double beta,
                             MetricSet set = MetricSet::all());

struct PartitionDiagnostic {
  std::vector<double> samples;  // Z(c) per sampled direction, in draw order
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation
  double min = 0.0;
  double max = 0.0;
  double second_order_a = 1.0;

  double sampled_ratio() const { return max / min; }
};

// (|V| + g_max / 2) / (|V| + g_min / 2) with g the eigenvalues of Z^T Z.
double second_order_anisotropy(std::size_t vocab_size, double gram_top, double gram_bottom);

// Draws n_dirs directions uniformly on the unit sphere (normalized Gaussian
// draws from a generator seeded with `seed`) and evaluates
// Z(c) = sum_w exp(c . z(w)). `threads` > 1 splits the direction list across
// workers; results do not depend on it.
PartitionDiagnostic partition_diagnostic(const EmbeddingMatrix& emb, const CovarianceSpectrum& spec,
                                         std::size_t n_dirs, std::uint64_t seed,
                                         unsigned threads = 1);

}  // namespace spectrahack
