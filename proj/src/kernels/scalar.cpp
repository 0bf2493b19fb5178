#include "spectrahack/kernels.hpp"

namespace spectrahack::kernels {
namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

double sum_squares_scalar(const double* x, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += x[i] * x[i];
  return acc;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void gram_upper_scalar(const double* rows, std::size_t n, std::size_t d,
                       double* out) {
  for (std::size_t r = 0; r < n; ++r) {
    const double* z = rows + r * d;
    for (std::size_t i = 0; i < d; ++i) {
      const double zi = z[i];
      double* row = out + i * d;
      for (std::size_t j = i; j < d; ++j) row[j] += zi * z[j];
    }
  }
}

void gemv_scalar(const double* m, std::size_t n, std::size_t d,
                 const double* x, double* y) {
  for (std::size_t r = 0; r < n; ++r) y[r] = dot_scalar(m + r * d, x, d);
}

constexpr KernelTable kScalar{Level::Scalar,      dot_scalar,
                              sum_squares_scalar, axpy_scalar,
                              gram_upper_scalar,  gemv_scalar};

}  // namespace

const KernelTable& scalar_table() { return kScalar; }

}  // namespace spectrahack::kernels
