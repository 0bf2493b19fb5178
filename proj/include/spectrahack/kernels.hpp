#pragma once

// Data-parallel inner loops shared by the covariance, projection and
// partition-function code. Every kernel has a scalar reference
// implementation; SIMD variants are selected once at runtime and must agree
// with the reference to rounding (see tests/test_kernels.cpp).

#include <cstddef>
#include <span>
#include <string_view>

namespace spectrahack::kernels {

enum class Level { Scalar, Avx2, Neon };

std::string_view to_string(Level level);

struct KernelTable {
  Level level;
  // sum_i a[i] * b[i]
  double (*dot)(const double* a, const double* b, std::size_t n);
  // sum_i x[i]^2
  double (*sum_squares)(const double* x, std::size_t n);
  // y[i] += alpha * x[i]
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  // out[i*d + j] += sum_r rows[r*d + i] * rows[r*d + j] for j >= i.
  // Only the upper triangle (including diagonal) is defined on return.
  void (*gram_upper)(const double* rows, std::size_t n, std::size_t d,
                     double* out);
  // y[r] = sum_j m[r*d + j] * x[j]
  void (*gemv)(const double* m, std::size_t n, std::size_t d, const double* x,
               double* y);
};

// Reference implementations, always available.
const KernelTable& scalar_table();

// Highest level supported by both the build and the running CPU.
Level best_available();
bool is_available(Level level);

// Table used by the library. Defaults to best_available(), or to Scalar when
// the environment variable SPECTRAHACK_SIMD=scalar is set.
const KernelTable& active();

// Overrides the active table; throws Error(InvalidArgument) when `level` is
// not available. Intended for tests and benchmarking.
void set_active(Level level);

namespace detail {
const KernelTable* avx2_table();
const KernelTable* neon_table();
}  // namespace detail

// Convenience wrappers over active().
inline double dot(std::span<const double> a, std::span<const double> b) {
  return active().dot(a.data(), b.data(), a.size());
}
inline double sum_squares(std::span<const double> x) {
  return active().sum_squares(x.data(), x.size());
}

}  // namespace spectrahack::kernels
