// aarch64 only; NEON is mandatory there so no runtime probe is needed.

#include <arm_neon.h>

#include "spectrahack/kernels.hpp"

namespace spectrahack::kernels {
namespace {

double dot_neon(const double* a, const double* b, std::size_t n) {
  float64x2_t acc0 = vdupq_n_f64(0.0);
  float64x2_t acc1 = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc0 = vfmaq_f64(acc0, vld1q_f64(a + i), vld1q_f64(b + i));
    acc1 = vfmaq_f64(acc1, vld1q_f64(a + i + 2), vld1q_f64(b + i + 2));
  }
  double acc = vaddvq_f64(vaddq_f64(acc0, acc1));
  for (; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

double sum_squares_neon(const double* x, std::size_t n) {
  return dot_neon(x, x, n);
}

void axpy_neon(double alpha, const double* x, double* y, std::size_t n) {
  const float64x2_t a = vdupq_n_f64(alpha);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    vst1q_f64(y + i, vfmaq_f64(vld1q_f64(y + i), a, vld1q_f64(x + i)));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void gram_upper_neon(const double* rows, std::size_t n, std::size_t d,
                     double* out) {
  for (std::size_t r = 0; r < n; ++r) {
    const double* z = rows + r * d;
    for (std::size_t i = 0; i < d; ++i) {
      const float64x2_t a = vdupq_n_f64(z[i]);
      double* row = out + i * d;
      std::size_t j = i & ~std::size_t{1};
      for (; j + 2 <= d; j += 2) {
        vst1q_f64(row + j, vfmaq_f64(vld1q_f64(row + j), a, vld1q_f64(z + j)));
      }
      for (; j < d; ++j) row[j] += z[i] * z[j];
    }
  }
}

void gemv_neon(const double* m, std::size_t n, std::size_t d, const double* x,
               double* y) {
  for (std::size_t r = 0; r < n; ++r) y[r] = dot_neon(m + r * d, x, d);
}

constexpr KernelTable kNeon{Level::Neon,      dot_neon,        sum_squares_neon,
                            axpy_neon,        gram_upper_neon, gemv_neon};

}  // namespace

namespace detail {
const KernelTable* neon_table() { return &kNeon; }
}  // namespace detail

}  // namespace spectrahack::kernels
