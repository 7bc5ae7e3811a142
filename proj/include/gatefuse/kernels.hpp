#pragma once

// Inner-loop double-precision kernels with a scalar reference implementation
// and SIMD variants (AVX2+FMA on x86-64, NEON on AArch64). The variant is
// picked once per process from CPU features; GATEFUSE_KERNELS=scalar|avx2|neon
// overrides the choice.
//
// Every kernel works on one contiguous row at a time, so the result for a
// given row never depends on which other rows share the batch.

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

namespace gatefuse::kernels {

enum class Backend { scalar, avx2, neon };

struct KernelTable {
  Backend backend;
  // y += a * x
  void (*axpy)(std::size_t n, double a, const double* x, double* y);
  double (*dot)(std::size_t n, const double* x, const double* y);
  double (*squared_distance)(std::size_t n, const double* x, const double* y);
};

std::string_view backend_name(Backend b);

bool available(Backend b);

// All backends usable on this machine, scalar first.
std::vector<Backend> available_backends();

const KernelTable& table(Backend b);

const KernelTable& active();

// Switch the process-wide backend. Intended for tests and the CLI; must not
// race with running computations.
void set_backend(Backend b);

inline void axpy(double a, std::span<const double> x, std::span<double> y) {
  active().axpy(x.size(), a, x.data(), y.data());
}

inline double dot(std::span<const double> x, std::span<const double> y) {
  return active().dot(x.size(), x.data(), y.data());
}

inline double squared_distance(std::span<const double> x, std::span<const double> y) {
  return active().squared_distance(x.size(), x.data(), y.data());
}

namespace detail {
const KernelTable& scalar_table();
#if defined(__x86_64__) || defined(_M_X64)
const KernelTable& avx2_table();
#endif
#if defined(__aarch64__)
const KernelTable& neon_table();
#endif
}  // namespace detail

}  // namespace gatefuse::kernels
