#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "spectrahack/tensor_io.hpp"

namespace spectrahack {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline constexpr double kDefaultAlpha = 1e-8;

// |V| x D token representations. preprocess() produces rows that were unit
// length before the column means were removed; razors may hand back
// transformed embeddings that no longer have unit rows.
class EmbeddingMatrix {
 public:
  EmbeddingMatrix() = default;
  explicit EmbeddingMatrix(RowMatrix values);

  const RowMatrix& values() const noexcept { return values_; }
  std::size_t vocab_size() const noexcept { return static_cast<std::size_t>(values_.rows()); }
  std::size_t dim() const noexcept { return static_cast<std::size_t>(values_.cols()); }
  std::span<const double> row(std::size_t r) const {
    return {values_.data() + r * dim(), dim()};
  }

 private:
  RowMatrix values_;
};

struct CovarianceSpectrum {
  std::vector<double> eigenvalues;  // descending
  Eigen::MatrixXd eigenvectors;     // column d pairs with eigenvalues[d]
  double alpha = kDefaultAlpha;
  std::size_t vocab_size = 0;

  std::size_t dim() const noexcept { return eigenvalues.size(); }
  double top() const { return eigenvalues.front(); }
  double bottom() const { return eigenvalues.back(); }
};

// L2-normalize each row, then subtract the column means.
EmbeddingMatrix preprocess(const RawMatrix& raw);

// (1/|V|) Z^T Z + alpha I, computed with the active SIMD kernels.
Eigen::MatrixXd covariance_matrix(const EmbeddingMatrix& emb, double alpha);

// Full eigendecomposition of the regularized covariance.
CovarianceSpectrum covariance(const EmbeddingMatrix& emb, double alpha = kDefaultAlpha);

// Eigenvalues only. When |V| < D this goes through the |V| x |V| Gram matrix
// and pads the remaining D - |V| eigenvalues with alpha.
std::vector<double> covariance_eigenvalues(const EmbeddingMatrix& emb,
                                           double alpha = kDefaultAlpha);

// Decomposes a symmetric matrix into a CovarianceSpectrum. Eigenvalues are
// floored at alpha, sorted descending with ties kept in solver order.
CovarianceSpectrum decompose_symmetric(const Eigen::MatrixXd& sym, double alpha,
                                       std::size_t vocab_size);

// Linear-interpolation quantiles of the eigenvalue multiset. `probs` must be
// ascending and within [0, 1].
std::vector<std::pair<double, double>> spectrum_quantiles(std::span<const double> eigenvalues,
                                                          std::span<const double> probs);
std::vector<std::pair<double, double>> spectrum_quantiles(const CovarianceSpectrum& spec,
                                                          std::span<const double> probs);

// Eigenvalues of Z^T Z recovered from the regularized covariance spectrum,
// |V| * (lambda_d - alpha), clamped at zero.
std::vector<double> gram_eigenvalues(const CovarianceSpectrum& spec);

}  // namespace spectrahack
