#include "spectrahack/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "spectrahack/error.hpp"
#include "spectrahack/kernels.hpp"
#include "spectrahack/parallel.hpp"

namespace spectrahack {
namespace {

void require_spectrum(std::span<const double> eigenvalues) {
  if (eigenvalues.empty()) throw Error(ErrorCode::EmptyInput, "empty spectrum");
  for (std::size_t i = 0; i < eigenvalues.size(); ++i) {
    if (!(eigenvalues[i] > 0.0) || !std::isfinite(eigenvalues[i])) {
      throw Error(ErrorCode::InvalidArgument, "eigenvalues must be positive and finite", i);
    }
  }
}

void require_beta(double beta) {
  if (!(beta >= 0.0 && beta <= 1.0)) {
    throw Error(ErrorCode::BetaOutOfRange, "beta must lie in [0, 1], got " + std::to_string(beta));
  }
}

}  // namespace

double compression_de(std::span<const double> eigenvalues) {
  require_spectrum(eigenvalues);
  double sum = 0.0;
  for (double v : eigenvalues) sum += std::log(v);
  return -0.5 * sum;
}

double anisotropy(std::span<const double> eigenvalues) {
  require_spectrum(eigenvalues);
  const auto [lo, hi] = std::minmax_element(eigenvalues.begin(), eigenvalues.end());
  return *hi / *lo;
}

double compression_se(std::span<const double> eigenvalues) {
  require_spectrum(eigenvalues);
  double sum = 0.0;
  for (double v : eigenvalues) sum += v * std::log(v);
  return -sum;
}

double semantic_cv(std::span<const double> eigenvalues) {
  const double de = compression_de(eigenvalues);
  if (std::abs(de) <= kCvEpsilon) {
    throw Error(ErrorCode::DegenerateCompression,
                "compression_de is within 1e-12 of zero; semantic CV undefined");
  }
  return anisotropy(eigenvalues) / de;
}

std::vector<double> pcs_smooth(std::span<const double> eigenvalues, double beta) {
  require_beta(beta);
  require_spectrum(eigenvalues);
  const double top = *std::max_element(eigenvalues.begin(), eigenvalues.end());
  std::vector<double> out;
  out.reserve(eigenvalues.size());
  // v + beta (top - v) keeps top fixed and is monotone in beta under rounding.
  for (double v : eigenvalues) out.push_back(beta == 1.0 ? top : v + beta * (top - v));
  return out;
}

double compression_pcs(std::span<const double> eigenvalues, double beta) {
  return compression_de(pcs_smooth(eigenvalues, beta));
}

const char* metric_name(Metric m) {
  switch (m) {
    case Metric::DE: return "c_de";
    case Metric::SE: return "c_se";
    case Metric::CV: return "semantic_cv";
    case Metric::PCS: return "c_pcs";
    case Metric::Anisotropy: return "anisotropy";
  }
  return "unknown";
}

std::optional<Metric> metric_from_name(std::string_view name) {
  for (Metric m : kAllMetrics) {
    if (name == metric_name(m)) return m;
  }
  // Short aliases accepted on the command line and in configs.
  if (name == "DE") return Metric::DE;
  if (name == "SE") return Metric::SE;
  if (name == "CV") return Metric::CV;
  if (name == "PCS") return Metric::PCS;
  if (name == "Anisotropy" || name == "A") return Metric::Anisotropy;
  return std::nullopt;
}

std::optional<double> MetricReport::get(Metric m) const {
  switch (m) {
    case Metric::DE: return c_de;
    case Metric::SE: return c_se;
    case Metric::CV: return semantic_cv;
    case Metric::PCS: return c_pcs;
    case Metric::Anisotropy: return anisotropy;
  }
  return std::nullopt;
}

void MetricReport::set(Metric m, double value) {
  switch (m) {
    case Metric::DE: c_de = value; break;
    case Metric::SE: c_se = value; break;
    case Metric::CV: semantic_cv = value; break;
    case Metric::PCS: c_pcs = value; break;
    case Metric::Anisotropy: anisotropy = value; break;
  }
}

MetricReport compute_metrics(std::span<const double> eigenvalues, double alpha, double beta,
                             MetricSet set) {
  MetricReport r;
  r.alpha = alpha;
  r.beta = beta;
  if (set.contains(Metric::DE)) r.c_de = compression_de(eigenvalues);
  if (set.contains(Metric::Anisotropy)) r.anisotropy = anisotropy(eigenvalues);
  if (set.contains(Metric::SE)) r.c_se = compression_se(eigenvalues);
  if (set.contains(Metric::CV)) r.semantic_cv = semantic_cv(eigenvalues);
  if (set.contains(Metric::PCS)) r.c_pcs = compression_pcs(eigenvalues, beta);
  return r;
}

double second_order_anisotropy(std::size_t vocab_size, double gram_top, double gram_bottom) {
  const double n = static_cast<double>(vocab_size);
  return (n + 0.5 * gram_top) / (n + 0.5 * gram_bottom);
}

PartitionDiagnostic partition_diagnostic(const EmbeddingMatrix& emb, const CovarianceSpectrum& spec,
                                         std::size_t n_dirs, std::uint64_t seed,
                                         unsigned threads) {
  if (n_dirs < 2) throw Error(ErrorCode::InvalidArgument, "n_dirs must be at least 2");
  if (spec.dim() != emb.dim()) {
    throw Error(ErrorCode::DimMismatch, "spectrum and embedding dimensions differ");
  }
  const std::size_t n = emb.vocab_size();
  const std::size_t d = emb.dim();

  // Directions are drawn serially so the sample list depends only on seed.
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> dirs(n_dirs * d);
  const auto& k = kernels::active();
  for (std::size_t i = 0; i < n_dirs; ++i) {
    double* c = dirs.data() + i * d;
    double norm2 = 0.0;
    do {
      for (std::size_t j = 0; j < d; ++j) c[j] = gauss(rng);
      norm2 = k.sum_squares(c, d);
    } while (norm2 == 0.0);
    const double inv = 1.0 / std::sqrt(norm2);
    for (std::size_t j = 0; j < d; ++j) c[j] *= inv;
  }

  PartitionDiagnostic diag;
  diag.samples.assign(n_dirs, 0.0);
  const unsigned workers = std::max(1u, threads);
  std::vector<std::vector<double>> scratch(workers, std::vector<double>(n));
  // Each worker owns a contiguous block, so block index == worker id.
  parallel_for(workers, workers, [&](std::size_t w) {
    auto& proj = scratch[w];
    const std::size_t begin = n_dirs * w / workers;
    const std::size_t end = n_dirs * (w + 1) / workers;
    for (std::size_t i = begin; i < end; ++i) {
      k.gemv(emb.values().data(), n, d, dirs.data() + i * d, proj.data());
      double z = 0.0;
      for (double p : proj) z += std::exp(p);
      diag.samples[i] = z;
    }
  });

  double sum = 0.0;
  for (double z : diag.samples) sum += z;
  diag.mean = sum / static_cast<double>(n_dirs);
  double ss = 0.0;
  for (double z : diag.samples) ss += (z - diag.mean) * (z - diag.mean);
  diag.std = std::sqrt(ss / static_cast<double>(n_dirs - 1));
  const auto [lo, hi] = std::minmax_element(diag.samples.begin(), diag.samples.end());
  diag.min = *lo;
  diag.max = *hi;

  const double nv = static_cast<double>(n);
  const double gram_top = std::max(0.0, nv * (spec.top() - spec.alpha));
  const double gram_bottom = std::max(0.0, nv * (spec.bottom() - spec.alpha));
  diag.second_order_a = second_order_anisotropy(n, gram_top, gram_bottom);
  return diag;
}

}  // namespace spectrahack
