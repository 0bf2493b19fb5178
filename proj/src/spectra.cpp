#include "spectrahack/spectra.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "spectrahack/error.hpp"
#include "spectrahack/kernels.hpp"

namespace spectrahack {
namespace {

std::vector<double> sorted_descending(const Eigen::VectorXd& values,
                                      std::vector<Eigen::Index>* order_out) {
  std::vector<Eigen::Index> order(static_cast<std::size_t>(values.size()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return values(a) > values(b); });
  std::vector<double> out;
  out.reserve(order.size());
  for (auto i : order) out.push_back(values(i));
  if (order_out != nullptr) *order_out = std::move(order);
  return out;
}

}  // namespace

EmbeddingMatrix::EmbeddingMatrix(RowMatrix values) : values_(std::move(values)) {
  if (values_.rows() == 0 || values_.cols() == 0) {
    throw Error(ErrorCode::ShapeMismatch, "embedding must be non-empty");
  }
  if (!values_.allFinite()) {
    throw Error(ErrorCode::NonFiniteValue, "embedding contains non-finite values");
  }
}

EmbeddingMatrix preprocess(const RawMatrix& raw) {
  const std::size_t n = raw.rows();
  const std::size_t d = raw.cols();
  RowMatrix z(n, d);
  const auto& k = kernels::active();
  for (std::size_t r = 0; r < n; ++r) {
    const auto src = raw.row(r);
    const double norm = std::sqrt(k.sum_squares(src.data(), d));
    if (norm == 0.0) throw Error(ErrorCode::ZeroRow, "row " + std::to_string(r) + " is zero", r);
    double* dst = z.data() + r * d;
    for (std::size_t c = 0; c < d; ++c) dst[c] = src[c] / norm;
  }
  std::vector<double> mean(d, 0.0);
  for (std::size_t r = 0; r < n; ++r) k.axpy(1.0, z.data() + r * d, mean.data(), d);
  for (auto& m : mean) m /= static_cast<double>(n);
  for (std::size_t r = 0; r < n; ++r) k.axpy(-1.0, mean.data(), z.data() + r * d, d);
  return EmbeddingMatrix(std::move(z));
}

Eigen::MatrixXd covariance_matrix(const EmbeddingMatrix& emb, double alpha) {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) {
    throw Error(ErrorCode::InvalidArgument, "alpha must be positive and finite");
  }
  const std::size_t n = emb.vocab_size();
  const std::size_t d = emb.dim();
  RowMatrix gram = RowMatrix::Zero(d, d);
  kernels::active().gram_upper(emb.values().data(), n, d, gram.data());
  const double inv_n = 1.0 / static_cast<double>(n);
  Eigen::MatrixXd sigma(d, d);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = i; j < d; ++j) {
      const double v = gram(i, j) * inv_n;
      sigma(i, j) = v;
      sigma(j, i) = v;
    }
    sigma(i, i) += alpha;
  }
  return sigma;
}

CovarianceSpectrum decompose_symmetric(const Eigen::MatrixXd& sym, double alpha,
                                       std::size_t vocab_size) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(sym, Eigen::ComputeEigenvectors);
  if (solver.info() != Eigen::Success) {
    throw Error(ErrorCode::EigenFailure, "symmetric eigensolver did not converge");
  }
  std::vector<Eigen::Index> order;
  CovarianceSpectrum spec;
  spec.eigenvalues = sorted_descending(solver.eigenvalues(), &order);
  for (auto& v : spec.eigenvalues) v = std::max(v, alpha);
  spec.eigenvectors.resize(sym.rows(), sym.cols());
  for (std::size_t c = 0; c < order.size(); ++c) {
    spec.eigenvectors.col(static_cast<Eigen::Index>(c)) = solver.eigenvectors().col(order[c]);
  }
  spec.alpha = alpha;
  spec.vocab_size = vocab_size;
  return spec;
}

CovarianceSpectrum covariance(const EmbeddingMatrix& emb, double alpha) {
  return decompose_symmetric(covariance_matrix(emb, alpha), alpha, emb.vocab_size());
}

std::vector<double> covariance_eigenvalues(const EmbeddingMatrix& emb, double alpha) {
  const std::size_t n = emb.vocab_size();
  const std::size_t d = emb.dim();
  if (n >= d) return covariance(emb, alpha).eigenvalues;
  if (!(alpha > 0.0) || !std::isfinite(alpha)) {
    throw Error(ErrorCode::InvalidArgument, "alpha must be positive and finite");
  }
  // Nonzero eigenvalues of Z^T Z and Z Z^T coincide.
  const auto& k = kernels::active();
  const double inv_n = 1.0 / static_cast<double>(n);
  Eigen::MatrixXd gram(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      const double v = k.dot(emb.row(i).data(), emb.row(j).data(), d) * inv_n;
      gram(i, j) = v;
      gram(j, i) = v;
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(gram, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) {
    throw Error(ErrorCode::EigenFailure, "symmetric eigensolver did not converge");
  }
  std::vector<double> values = sorted_descending(solver.eigenvalues(), nullptr);
  for (auto& v : values) v = std::max(v + alpha, alpha);
  values.resize(d, alpha);
  return values;
}

std::vector<std::pair<double, double>> spectrum_quantiles(std::span<const double> eigenvalues,
                                                          std::span<const double> probs) {
  if (probs.empty()) throw Error(ErrorCode::EmptyProbs, "no quantile probabilities given");
  if (eigenvalues.empty()) throw Error(ErrorCode::EmptyInput, "empty spectrum");
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (!(probs[i] >= 0.0 && probs[i] <= 1.0)) {
      throw Error(ErrorCode::InvalidArgument, "probability outside [0,1]", i);
    }
    if (i > 0 && probs[i] < probs[i - 1]) {
      throw Error(ErrorCode::InvalidArgument, "probabilities must be ascending", i);
    }
  }
  std::vector<double> sorted(eigenvalues.begin(), eigenvalues.end());
  std::sort(sorted.begin(), sorted.end());
  const double last = static_cast<double>(sorted.size() - 1);
  std::vector<std::pair<double, double>> out;
  out.reserve(probs.size());
  for (double p : probs) {
    const double h = last * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = h - static_cast<double>(lo);
    out.emplace_back(p, sorted[lo] + frac * (sorted[hi] - sorted[lo]));
  }
  return out;
}

std::vector<std::pair<double, double>> spectrum_quantiles(const CovarianceSpectrum& spec,
                                                          std::span<const double> probs) {
  return spectrum_quantiles(spec.eigenvalues, probs);
}

std::vector<double> gram_eigenvalues(const CovarianceSpectrum& spec) {
  std::vector<double> out;
  out.reserve(spec.dim());
  const double n = static_cast<double>(spec.vocab_size);
  for (double v : spec.eigenvalues) out.push_back(std::max(0.0, n * (v - spec.alpha)));
  return out;
}

}  // namespace spectrahack
