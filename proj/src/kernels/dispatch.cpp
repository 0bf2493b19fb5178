#include <atomic>
#include <cstdlib>
#include <cstring>

#include "spectrahack/error.hpp"
#include "spectrahack/kernels.hpp"

namespace spectrahack::kernels {

#ifndef SPECTRAHACK_HAVE_AVX2
namespace detail {
const KernelTable* avx2_table() { return nullptr; }
}  // namespace detail
#endif
#ifndef SPECTRAHACK_HAVE_NEON
namespace detail {
const KernelTable* neon_table() { return nullptr; }
}  // namespace detail
#endif

std::string_view to_string(Level level) {
  switch (level) {
    case Level::Scalar: return "scalar";
    case Level::Avx2: return "avx2";
    case Level::Neon: return "neon";
  }
  return "unknown";
}

bool is_available(Level level) {
  switch (level) {
    case Level::Scalar:
      return true;
    case Level::Avx2:
#if defined(SPECTRAHACK_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
      return false;
#endif
    case Level::Neon:
      return detail::neon_table() != nullptr;
  }
  return false;
}

Level best_available() {
  if (is_available(Level::Avx2)) return Level::Avx2;
  if (is_available(Level::Neon)) return Level::Neon;
  return Level::Scalar;
}

namespace {

const KernelTable* table_for(Level level) {
  switch (level) {
    case Level::Scalar: return &scalar_table();
    case Level::Avx2: return detail::avx2_table();
    case Level::Neon: return detail::neon_table();
  }
  return nullptr;
}

const KernelTable* initial_table() {
  const char* env = std::getenv("SPECTRAHACK_SIMD");
  if (env != nullptr && std::strcmp(env, "scalar") == 0) return &scalar_table();
  return table_for(best_available());
}

std::atomic<const KernelTable*>& active_slot() {
  static std::atomic<const KernelTable*> slot{initial_table()};
  return slot;
}

}  // namespace

const KernelTable& active() {
  return *active_slot().load(std::memory_order_acquire);
}

void set_active(Level level) {
  if (!is_available(level)) {
    throw Error(ErrorCode::InvalidArgument,
                "kernel level not available: " + std::string(to_string(level)));
  }
  active_slot().store(table_for(level), std::memory_order_release);
}

}  // namespace spectrahack::kernels
