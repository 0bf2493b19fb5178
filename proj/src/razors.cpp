#include "spectrahack/razors.hpp"

#include <cmath>
#include <numeric>

#include "spectrahack/error.hpp"

namespace spectrahack {

std::string to_string(RazorKind kind) {
  switch (kind) {
    case RazorKind::PCS: return "PCS";
    case RazorKind::LWShrinkage: return "LWShrinkage";
    case RazorKind::Whitening: return "Whitening";
    case RazorKind::RemoveDirections: return "RemoveDirections";
  }
  return "Unknown";
}

RazorKind razor_kind_from_string(const std::string& name) {
  if (name == "PCS") return RazorKind::PCS;
  if (name == "LWShrinkage" || name == "LW") return RazorKind::LWShrinkage;
  if (name == "Whitening") return RazorKind::Whitening;
  if (name == "RemoveDirections") return RazorKind::RemoveDirections;
  throw Error(ErrorCode::InvalidArgument, "unknown razor kind '" + name + "'");
}

void to_json(nlohmann::json& j, const RazorConfig& c) {
  j = nlohmann::json{{"kind", to_string(c.kind)}, {"beta", c.beta}};
  j["shrink_intensity"] = c.shrink_intensity ? nlohmann::json(*c.shrink_intensity) : nullptr;
  j["remove_count"] = c.remove_count ? nlohmann::json(*c.remove_count) : nullptr;
}

void from_json(const nlohmann::json& j, RazorConfig& c) {
  if (!j.is_object() || !j.contains("kind") || !j.at("kind").is_string()) {
    throw Error(ErrorCode::ParseFailure, "razor config must be an object with a string 'kind'");
  }
  c = RazorConfig{};
  c.kind = razor_kind_from_string(j.at("kind").get<std::string>());
  if (j.contains("beta") && !j.at("beta").is_null()) c.beta = j.at("beta").get<double>();
  if (j.contains("shrink_intensity") && !j.at("shrink_intensity").is_null()) {
    c.shrink_intensity = j.at("shrink_intensity").get<double>();
  }
  if (j.contains("remove_count") && !j.at("remove_count").is_null()) {
    const auto& v = j.at("remove_count");
    if (!v.is_number_integer() || v.get<long long>() < 0) {
      throw Error(ErrorCode::ParseFailure, "remove_count must be a non-negative integer");
    }
    c.remove_count = v.get<std::size_t>();
  }
}

RazorResult apply_pcs(const CovarianceSpectrum& spec, double beta) {
  RazorResult out;
  out.spectrum_after = spec;
  out.spectrum_after.eigenvalues = pcs_smooth(spec.eigenvalues, beta);
  out.applied.kind = RazorKind::PCS;
  out.applied.beta = beta;
  return out;
}

RazorResult apply_lw(const CovarianceSpectrum& spec, std::optional<double> intensity) {
  double b = 0.0;
  if (intensity) {
    if (!(*intensity >= 0.0 && *intensity <= 1.0)) {
      throw Error(ErrorCode::IntensityOutOfRange,
                  "shrink intensity must lie in [0, 1], got " + std::to_string(*intensity));
    }
    b = *intensity;
  } else {
    if (spec.vocab_size == 0) {
      throw Error(ErrorCode::InvalidArgument, "default LW intensity needs the sample count");
    }
    b = std::min(1.0, 1.0 / static_cast<double>(spec.vocab_size));
  }
  const auto& ev = spec.eigenvalues;
  if (ev.empty()) throw Error(ErrorCode::EmptyInput, "empty spectrum");
  const double mu = std::accumulate(ev.begin(), ev.end(), 0.0) / static_cast<double>(ev.size());
  RazorResult out;
  out.spectrum_after = spec;
  for (auto& v : out.spectrum_after.eigenvalues) v = b == 1.0 ? mu : v + b * (mu - v);
  out.applied.kind = RazorKind::LWShrinkage;
  out.applied.shrink_intensity = b;
  return out;
}

RazorResult apply_whitening(const EmbeddingMatrix& emb, double alpha) {
  const CovarianceSpectrum spec = covariance(emb, alpha);
  Eigen::MatrixXd w = spec.eigenvectors;
  for (Eigen::Index c = 0; c < w.cols(); ++c) {
    w.col(c) /= std::sqrt(spec.eigenvalues[static_cast<std::size_t>(c)]);
  }
  EmbeddingMatrix white(RowMatrix(emb.values() * w));
  RazorResult out;
  out.spectrum_after = covariance(white, alpha);
  out.embedding_after = std::move(white);
  out.applied.kind = RazorKind::Whitening;
  return out;
}

std::size_t default_remove_count(std::size_t dim) {
  const auto k = static_cast<std::size_t>(std::llround(static_cast<double>(dim) / 100.0));
  return std::max<std::size_t>(1, k);
}

RazorResult apply_remove_directions(const EmbeddingMatrix& emb, std::size_t remove_count,
                                    double alpha) {
  const std::size_t d = emb.dim();
  if (remove_count == 0 || remove_count >= d) {
    throw Error(ErrorCode::RemoveCountOutOfRange,
                "remove_count must satisfy 0 < k < D (k=" + std::to_string(remove_count) +
                    ", D=" + std::to_string(d) + ")");
  }
  RowMatrix z = emb.values();
  const Eigen::RowVectorXd mean = z.colwise().mean();
  z.rowwise() -= mean;
  const EmbeddingMatrix centered(z);
  const CovarianceSpectrum spec = covariance(centered, alpha);
  const auto k = static_cast<Eigen::Index>(remove_count);
  const Eigen::MatrixXd top = spec.eigenvectors.leftCols(k);
  z -= (z * top) * top.transpose();
  EmbeddingMatrix projected(std::move(z));
  RazorResult out;
  out.spectrum_after = covariance(projected, alpha);
  out.embedding_after = std::move(projected);
  out.applied.kind = RazorKind::RemoveDirections;
  out.applied.remove_count = remove_count;
  return out;
}

RazorResult apply_razor(const RazorConfig& config, const EmbeddingMatrix& emb,
                        const CovarianceSpectrum& spec, double alpha) {
  switch (config.kind) {
    case RazorKind::PCS:
      return apply_pcs(spec, config.beta);
    case RazorKind::LWShrinkage:
      return apply_lw(spec, config.shrink_intensity);
    case RazorKind::Whitening:
      return apply_whitening(emb, alpha);
    case RazorKind::RemoveDirections:
      return apply_remove_directions(
          emb, config.remove_count.value_or(default_remove_count(emb.dim())), alpha);
  }
  throw Error(ErrorCode::InvalidArgument, "unknown razor kind");
}

EmbeddingMatrix map_embedding_to_spectrum(const EmbeddingMatrix& emb,
                                          const CovarianceSpectrum& before,
                                          const CovarianceSpectrum& after) {
  if (before.dim() != emb.dim() || after.dim() != emb.dim()) {
    throw Error(ErrorCode::DimMismatch, "spectrum and embedding dimensions differ");
  }
  Eigen::VectorXd scale(static_cast<Eigen::Index>(emb.dim()));
  for (std::size_t i = 0; i < emb.dim(); ++i) {
    scale(static_cast<Eigen::Index>(i)) = std::sqrt(after.eigenvalues[i] / before.eigenvalues[i]);
  }
  const Eigen::MatrixXd& q = before.eigenvectors;
  const Eigen::MatrixXd map = q * scale.asDiagonal() * q.transpose();
  return EmbeddingMatrix(RowMatrix(emb.values() * map));
}

}  // namespace spectrahack
