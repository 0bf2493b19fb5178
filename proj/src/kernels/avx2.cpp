// Compiled with -mavx2 -mfma; only reached after a runtime CPU check.

#include <immintrin.h>

#include "spectrahack/kernels.hpp"

namespace spectrahack::kernels {
namespace {

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d swapped = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, swapped));
}

double dot_avx2(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4),
                           _mm256_loadu_pd(b + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
  }
  double acc = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

double sum_squares_avx2(const double* x, std::size_t n) {
  return dot_avx2(x, x, n);
}

void axpy_avx2(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d a = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(a, _mm256_loadu_pd(x + i),
                                            _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

// Rank-1 updates two rows at a time. Each output row starts at the aligned
// block containing the diagonal, so a few strictly-lower entries are also
// written; callers only read the upper triangle.
void gram_upper_avx2(const double* rows, std::size_t n, std::size_t d,
                     double* out) {
  std::size_t r = 0;
  for (; r + 2 <= n; r += 2) {
    const double* z0 = rows + r * d;
    const double* z1 = z0 + d;
    for (std::size_t i = 0; i < d; ++i) {
      const __m256d a0 = _mm256_set1_pd(z0[i]);
      const __m256d a1 = _mm256_set1_pd(z1[i]);
      double* row = out + i * d;
      std::size_t j = i & ~std::size_t{3};
      for (; j + 4 <= d; j += 4) {
        __m256d acc = _mm256_loadu_pd(row + j);
        acc = _mm256_fmadd_pd(a0, _mm256_loadu_pd(z0 + j), acc);
        acc = _mm256_fmadd_pd(a1, _mm256_loadu_pd(z1 + j), acc);
        _mm256_storeu_pd(row + j, acc);
      }
      for (; j < d; ++j) row[j] += z0[i] * z0[j] + z1[i] * z1[j];
    }
  }
  for (; r < n; ++r) {
    const double* z = rows + r * d;
    for (std::size_t i = 0; i < d; ++i) {
      const __m256d a = _mm256_set1_pd(z[i]);
      double* row = out + i * d;
      std::size_t j = i & ~std::size_t{3};
      for (; j + 4 <= d; j += 4) {
        _mm256_storeu_pd(row + j,
                         _mm256_fmadd_pd(a, _mm256_loadu_pd(z + j),
                                         _mm256_loadu_pd(row + j)));
      }
      for (; j < d; ++j) row[j] += z[i] * z[j];
    }
  }
}

void gemv_avx2(const double* m, std::size_t n, std::size_t d, const double* x,
               double* y) {
  for (std::size_t r = 0; r < n; ++r) y[r] = dot_avx2(m + r * d, x, d);
}

constexpr KernelTable kAvx2{Level::Avx2,      dot_avx2,        sum_squares_avx2,
                            axpy_avx2,        gram_upper_avx2, gemv_avx2};

}  // namespace

namespace detail {
const KernelTable* avx2_table() { return &kAvx2; }
}  // namespace detail

}  // namespace spectrahack::kernels
