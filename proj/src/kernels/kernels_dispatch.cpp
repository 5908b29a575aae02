#include <atomic>
#include <cstdlib>
#include <string>

#include "attnbound/error.hpp"
#include "attnbound/kernels.hpp"

namespace attnbound::kernels {
namespace {

bool probe_avx2() noexcept {
#if defined(ATTNBOUND_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

bool cpu_has_avx2() noexcept {
  static const bool supported = probe_avx2();
  return supported;
}

Backend initial_backend() noexcept {
  if (const char* env = std::getenv("ATTNBOUND_BACKEND")) {
    const std::string requested(env);
    if (requested == "scalar") return Backend::scalar;
    if (requested == "avx2" && cpu_has_avx2()) return Backend::avx2;
  }
  return cpu_has_avx2() ? Backend::avx2 : Backend::scalar;
}

std::atomic<Backend>& active() {
  static std::atomic<Backend> backend{initial_backend()};
  return backend;
}

}  // namespace

std::string_view to_string(Backend backend) noexcept {
  switch (backend) {
    case Backend::scalar: return "scalar";
    case Backend::avx2: return "avx2";
  }
  return "unknown";
}

bool backend_supported(Backend backend) noexcept {
  switch (backend) {
    case Backend::scalar: return true;
    case Backend::avx2: return cpu_has_avx2();
  }
  return false;
}

const KernelTable& table(Backend backend) {
  if (!backend_supported(backend)) {
    fail(ErrorKind::range, "kernel backend '" + std::string(to_string(backend)) + "' is not available");
  }
#if defined(ATTNBOUND_HAVE_AVX2)
  if (backend == Backend::avx2) return detail::avx2_table;
#endif
  return detail::scalar_table;
}

Backend active_backend() noexcept { return active().load(std::memory_order_relaxed); }

void set_backend(Backend backend) {
  (void)table(backend);
  active().store(backend, std::memory_order_relaxed);
}

namespace {
const KernelTable& current() {
#if defined(ATTNBOUND_HAVE_AVX2)
  if (active_backend() == Backend::avx2) return detail::avx2_table;
#endif
  return detail::scalar_table;
}

void check_lengths(std::size_t a, std::size_t b) {
  if (a != b) fail(ErrorKind::dimension, "kernel operands have lengths " + std::to_string(a) + " and " + std::to_string(b));
}
}  // namespace

double dot(std::span<const double> a, std::span<const double> b) {
  check_lengths(a.size(), b.size());
  return current().dot(a.data(), b.data(), a.size());
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
  check_lengths(a.size(), b.size());
  return current().squared_distance(a.data(), b.data(), a.size());
}

double scaled_squared_distance(double alpha, std::span<const double> x, std::span<const double> s) {
  check_lengths(x.size(), s.size());
  return current().scaled_squared_distance(alpha, x.data(), s.data(), x.size());
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  check_lengths(x.size(), y.size());
  current().axpy(alpha, x.data(), y.data(), x.size());
}

double max_abs(std::span<const double> a) { return current().max_abs(a.data(), a.size()); }

}  // namespace attnbound::kernels
