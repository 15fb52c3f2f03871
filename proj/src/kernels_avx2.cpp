// AVX2/FMA variants of the inner-loop primitives. This translation unit is
// compiled with -mavx2 -mfma; callers must gate on avx2_available().

#include "tenkit/kernels.hpp"

#if defined(__x86_64__) || defined(_M_X64)
#include <immintrin.h>

namespace tenkit::kernels {
namespace {

void fill_avx2(double* dst, double value, std::size_t n) {
  const __m256d v = _mm256_set1_pd(value);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) _mm256_storeu_pd(dst + i, v);
  for (; i < n; ++i) dst[i] = value;
}

void mul_avx2(double* dst, const double* src, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d d = _mm256_loadu_pd(dst + i);
    __m256d s = _mm256_loadu_pd(src + i);
    _mm256_storeu_pd(dst + i, _mm256_mul_pd(d, s));
  }
  for (; i < n; ++i) dst[i] *= src[i];
}

void mul_to_avx2(double* dst, const double* a, const double* b,
                 std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d va = _mm256_loadu_pd(a + i);
    __m256d vb = _mm256_loadu_pd(b + i);
    _mm256_storeu_pd(dst + i, _mm256_mul_pd(va, vb));
  }
  for (; i < n; ++i) dst[i] = a[i] * b[i];
}

void add_avx2(double* dst, const double* src, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d d = _mm256_loadu_pd(dst + i);
    __m256d s = _mm256_loadu_pd(src + i);
    _mm256_storeu_pd(dst + i, _mm256_add_pd(d, s));
  }
  for (; i < n; ++i) dst[i] += src[i];
}

void axpy_avx2(double* dst, double alpha, const double* x, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d d = _mm256_loadu_pd(dst + i);
    __m256d vx = _mm256_loadu_pd(x + i);
    _mm256_storeu_pd(dst + i, _mm256_fmadd_pd(va, vx, d));
  }
  for (; i < n; ++i) dst[i] += alpha * x[i];
}

double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d shuf = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, shuf));
}

double dot_avx2(const double* x, const double* y, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d vx = _mm256_loadu_pd(x + i);
    __m256d vy = _mm256_loadu_pd(y + i);
    acc = _mm256_fmadd_pd(vx, vy, acc);
  }
  double result = hsum(acc);
  for (; i < n; ++i) result += x[i] * y[i];
  return result;
}

double sumsq_avx2(const double* x, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d vx = _mm256_loadu_pd(x + i);
    acc = _mm256_fmadd_pd(vx, vx, acc);
  }
  double result = hsum(acc);
  for (; i < n; ++i) result += x[i] * x[i];
  return result;
}

}  // namespace

const Table& avx2() {
  static const Table table = {fill_avx2, mul_avx2, mul_to_avx2, add_avx2,
                              axpy_avx2, dot_avx2, sumsq_avx2, "avx2"};
  return table;
}

bool avx2_available() {
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
}

}  // namespace tenkit::kernels

#else  // non-x86 builds fall back to the scalar table

namespace tenkit::kernels {

const Table& avx2() { return scalar(); }
bool avx2_available() { return false; }

}  // namespace tenkit::kernels

#endif
