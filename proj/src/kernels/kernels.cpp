#include "gatefuse/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

namespace gatefuse::kernels {

namespace {

void axpy_scalar(std::size_t n, double a, const double* x, double* y) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

double dot_scalar(std::size_t n, const double* x, const double* y) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += x[i] * y[i];
  return s;
}

double squared_distance_scalar(std::size_t n, const double* x, const double* y) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = x[i] - y[i];
    s += d * d;
  }
  return s;
}

bool cpu_has_avx2_fma() {
#if (defined(__x86_64__) || defined(_M_X64)) && (defined(__GNUC__) || defined(__clang__))
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Backend best_backend() {
  if (available(Backend::avx2)) return Backend::avx2;
  if (available(Backend::neon)) return Backend::neon;
  return Backend::scalar;
}

Backend initial_backend() {
  if (const char* env = std::getenv("GATEFUSE_KERNELS")) {
    const std::string v(env);
    if (v == "scalar") return Backend::scalar;
    if (v == "avx2" && available(Backend::avx2)) return Backend::avx2;
    if (v == "neon" && available(Backend::neon)) return Backend::neon;
  }
  return best_backend();
}

std::atomic<const KernelTable*>& active_slot() {
  static std::atomic<const KernelTable*> slot{&table(initial_backend())};
  return slot;
}

}  // namespace

namespace detail {
const KernelTable& scalar_table() {
  static const KernelTable t{Backend::scalar, &axpy_scalar, &dot_scalar, &squared_distance_scalar};
  return t;
}
}  // namespace detail

std::string_view backend_name(Backend b) {
  switch (b) {
    case Backend::scalar: return "scalar";
    case Backend::avx2: return "avx2";
    case Backend::neon: return "neon";
  }
  return "unknown";
}

bool available(Backend b) {
  switch (b) {
    case Backend::scalar: return true;
    case Backend::avx2: return cpu_has_avx2_fma();
    case Backend::neon:
#if defined(__aarch64__)
      return true;
#else
      return false;
#endif
  }
  return false;
}

std::vector<Backend> available_backends() {
  std::vector<Backend> out;
  for (Backend b : {Backend::scalar, Backend::avx2, Backend::neon})
    if (available(b)) out.push_back(b);
  return out;
}

const KernelTable& table(Backend b) {
  if (!available(b))
    throw std::runtime_error("kernel backend not available: " + std::string(backend_name(b)));
  switch (b) {
#if defined(__x86_64__) || defined(_M_X64)
    case Backend::avx2: return detail::avx2_table();
#endif
#if defined(__aarch64__)
    case Backend::neon: return detail::neon_table();
#endif
    default: return detail::scalar_table();
  }
}

const KernelTable& active() { return *active_slot().load(std::memory_order_relaxed); }

void set_backend(Backend b) { active_slot().store(&table(b), std::memory_order_relaxed); }

}  // namespace gatefuse::kernels
