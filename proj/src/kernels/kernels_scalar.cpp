#include <cmath>

#include "attnbound/kernels.hpp"

namespace attnbound::kernels::detail {
namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

double squared_distance_scalar(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double diff = a[i] - b[i];
    acc += diff * diff;
  }
  return acc;
}

double scaled_squared_distance_scalar(double alpha, const double* x, const double* s, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double diff = alpha * x[i] - s[i];
    acc += diff * diff;
  }
  return acc;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

double max_abs_scalar(const double* a, std::size_t n) {
  double m = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double v = std::fabs(a[i]);
    if (v > m) m = v;
  }
  return m;
}

}  // namespace

const KernelTable scalar_table{
    dot_scalar, squared_distance_scalar, scaled_squared_distance_scalar, axpy_scalar, max_abs_scalar,
};

}  // namespace attnbound::kernels::detail
