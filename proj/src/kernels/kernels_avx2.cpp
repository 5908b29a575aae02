// Compiled with -mavx2 -mfma; only reached after a runtime CPU check.

#include <immintrin.h>

#include <cmath>

#include "attnbound/kernels.hpp"

namespace attnbound::kernels::detail {
namespace {

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d pair = _mm_add_pd(lo, hi);
  const __m128d swapped = _mm_unpackhi_pd(pair, pair);
  return _mm_cvtsd_f64(_mm_add_sd(pair, swapped));
}

double dot_avx2(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
  }
  double acc = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

double squared_distance_avx2(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256d d0 = _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
    const __m256d d1 = _mm256_sub_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4));
    acc0 = _mm256_fmadd_pd(d0, d0, acc0);
    acc1 = _mm256_fmadd_pd(d1, d1, acc1);
  }
  for (; i + 4 <= n; i += 4) {
    const __m256d d0 = _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
    acc0 = _mm256_fmadd_pd(d0, d0, acc0);
  }
  double acc = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) {
    const double diff = a[i] - b[i];
    acc += diff * diff;
  }
  return acc;
}

// alpha * x is rounded before the subtraction (no fmsub) so that s == alpha * x
// gives exactly zero, as in the scalar kernel.
double scaled_squared_distance_avx2(double alpha, const double* x, const double* s, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256d d0 = _mm256_sub_pd(_mm256_mul_pd(va, _mm256_loadu_pd(x + i)), _mm256_loadu_pd(s + i));
    const __m256d d1 = _mm256_sub_pd(_mm256_mul_pd(va, _mm256_loadu_pd(x + i + 4)), _mm256_loadu_pd(s + i + 4));
    acc0 = _mm256_fmadd_pd(d0, d0, acc0);
    acc1 = _mm256_fmadd_pd(d1, d1, acc1);
  }
  for (; i + 4 <= n; i += 4) {
    const __m256d d0 = _mm256_sub_pd(_mm256_mul_pd(va, _mm256_loadu_pd(x + i)), _mm256_loadu_pd(s + i));
    acc0 = _mm256_fmadd_pd(d0, d0, acc0);
  }
  double acc = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) {
    const double diff = alpha * x[i] - s[i];
    acc += diff * diff;
  }
  return acc;
}

void axpy_avx2(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

double max_abs_avx2(const double* a, std::size_t n) {
  const __m256d sign_mask = _mm256_set1_pd(-0.0);
  __m256d m = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    m = _mm256_max_pd(m, _mm256_andnot_pd(sign_mask, _mm256_loadu_pd(a + i)));
  }
  alignas(32) double lanes[4];
  _mm256_store_pd(lanes, m);
  double best = lanes[0];
  for (int k = 1; k < 4; ++k) best = lanes[k] > best ? lanes[k] : best;
  for (; i < n; ++i) {
    const double v = std::fabs(a[i]);
    if (v > best) best = v;
  }
  return best;
}

}  // namespace

const KernelTable avx2_table{
    dot_avx2, squared_distance_avx2, scaled_squared_distance_avx2, axpy_avx2, max_abs_avx2,
};

}  // namespace attnbound::kernels::detail
