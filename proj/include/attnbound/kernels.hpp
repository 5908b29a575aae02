#pragma once

// Data-parallel inner loops used by every analysis module. Each kernel has a
// scalar reference implementation and, where the CPU allows it, an AVX2/FMA
// variant. The active variant is chosen once at startup (CPU feature probe,
// overridable with ATTNBOUND_BACKEND=scalar|avx2) and can be pinned from code
// with ScopedBackend.
//
// The scalar variant accumulates strictly left to right, so it reproduces a
// naive loop bit for bit. The AVX2 variant reassociates sums across lanes and
// is only equivalent up to rounding.

#include <cstddef>
#include <span>
#include <string_view>

namespace attnbound::kernels {

enum class Backend { scalar, avx2 };

struct KernelTable {
  double (*dot)(const double* a, const double* b, std::size_t n);
  double (*squared_distance)(const double* a, const double* b, std::size_t n);
  // ||alpha * x - s||^2
  double (*scaled_squared_distance)(double alpha, const double* x, const double* s, std::size_t n);
  // y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  double (*max_abs)(const double* a, std::size_t n);
};

std::string_view to_string(Backend backend) noexcept;
bool backend_supported(Backend backend) noexcept;
const KernelTable& table(Backend backend);

Backend active_backend() noexcept;
/// Throws range error if the backend is not compiled in or not supported by the CPU.
void set_backend(Backend backend);

/// Pins a backend for the lifetime of the guard (tests, oracle comparisons).
class ScopedBackend {
 public:
  explicit ScopedBackend(Backend backend) : previous_(active_backend()) { set_backend(backend); }
  ~ScopedBackend() { set_backend(previous_); }
  ScopedBackend(const ScopedBackend&) = delete;
  ScopedBackend& operator=(const ScopedBackend&) = delete;

 private:
  Backend previous_;
};

double dot(std::span<const double> a, std::span<const double> b);
double squared_distance(std::span<const double> a, std::span<const double> b);
double scaled_squared_distance(double alpha, std::span<const double> x, std::span<const double> s);
void axpy(double alpha, std::span<const double> x, std::span<double> y);
double max_abs(std::span<const double> a);

inline double squared_norm(std::span<const double> a) { return dot(a, a); }

namespace detail {
extern const KernelTable scalar_table;
#if defined(ATTNBOUND_HAVE_AVX2)
extern const KernelTable avx2_table;
#endif
}  // namespace detail

}  // namespace attnbound::kernels
