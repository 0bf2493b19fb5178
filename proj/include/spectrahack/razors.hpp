#pragma once

#include <cstddef>
#include <optional>
#include <string>

#include "json.hpp"
#include "spectrahack/metrics.hpp"
#include "spectrahack/spectra.hpp"

namespace spectrahack {

enum class RazorKind { PCS, LWShrinkage, Whitening, RemoveDirections };

std::string to_string(RazorKind kind);
RazorKind razor_kind_from_string(const std::string& name);

struct RazorConfig {
  RazorKind kind = RazorKind::PCS;
  double beta = kDefaultBeta;
  std::optional<double> shrink_intensity;  // LW override; default min(1, 1/|V|)
  std::optional<std::size_t> remove_count;  // default max(1, round(D/100))

  friend bool operator==(const RazorConfig&, const RazorConfig&) = default;
};

// {"kind","beta","shrink_intensity","remove_count"}; absent optionals are null.
void to_json(nlohmann::json& j, const RazorConfig& c);
void from_json(const nlohmann::json& j, RazorConfig& c);

struct RazorResult {
  CovarianceSpectrum spectrum_after;
  std::optional<EmbeddingMatrix> embedding_after;  // Whitening, RemoveDirections
  RazorConfig applied;  // with defaults resolved
};

// lambda'_d = (1 - beta) lambda_d + beta lambda_1, eigenvectors unchanged.
RazorResult apply_pcs(const CovarianceSpectrum& spec, double beta);

// lambda'_d = (1 - b) lambda_d + b mu, mu the mean eigenvalue. Without an
// explicit intensity, b = min(1, 1/|V|).
RazorResult apply_lw(const CovarianceSpectrum& spec, std::optional<double> intensity);

// Rows mapped through W = Q Lambda^{-1/2} of the regularized covariance.
// Rows are not re-normalized afterwards.
RazorResult apply_whitening(const EmbeddingMatrix& emb, double alpha);

// Re-centers, then removes the projection onto the top remove_count
// principal directions. Requires 0 < remove_count < D.
RazorResult apply_remove_directions(const EmbeddingMatrix& emb, std::size_t remove_count,
                                    double alpha);

std::size_t default_remove_count(std::size_t dim);

// Dispatches on config.kind. `spec` must be covariance(emb, alpha).
RazorResult apply_razor(const RazorConfig& config, const EmbeddingMatrix& emb,
                        const CovarianceSpectrum& spec, double alpha);

// Linear map z -> Q diag(sqrt(after_d / before_d)) Q^T z that carries the
// point cloud from `before` to the eigenvalues of `after` (same
// eigenvectors). Used to evaluate the partition function after a
// spectrum-only razor. Directions with no sample variance stay at zero.
EmbeddingMatrix map_embedding_to_spectrum(const EmbeddingMatrix& emb,
                                          const CovarianceSpectrum& before,
                                          const CovarianceSpectrum& after);

}  // namespace spectrahack
