// AVX2 variants. This translation unit is compiled with -mavx2 and only ever
// called after a runtime cpuid check.
//
// No FMA: per-lane mul-then-add keeps the element-wise kernels and the
// k-inner gemms bit-identical to the scalar reference; only the horizontal
// reductions (dot/sum/sumsq/gemm_nt) reassociate.

#if defined(__x86_64__) || defined(_M_X64)

#include <immintrin.h>

#include <cstring>

#include "kernels_impl.hpp"

namespace ltt::kern::detail {
namespace avx2 {

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d shuf = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, shuf));
}

void gemm_nn(const double* a, const double* b, double* c, int m, int k, int n) {
  std::memset(c, 0, sizeof(double) * static_cast<std::size_t>(m) * n);
  const int n4 = n & ~3;
  for (int i = 0; i < m; ++i) {
    const double* arow = a + static_cast<std::size_t>(i) * k;
    double* crow = c + static_cast<std::size_t>(i) * n;
    for (int kk = 0; kk < k; ++kk) {
      const double av = arow[kk];
      const __m256d avv = _mm256_set1_pd(av);
      const double* brow = b + static_cast<std::size_t>(kk) * n;
      int j = 0;
      for (; j < n4; j += 4) {
        __m256d cj = _mm256_loadu_pd(crow + j);
        __m256d bj = _mm256_loadu_pd(brow + j);
        cj = _mm256_add_pd(cj, _mm256_mul_pd(avv, bj));
        _mm256_storeu_pd(crow + j, cj);
      }
      for (; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void gemm_nt(const double* a, const double* b, double* c, int m, int k, int n) {
  const int k4 = k & ~3;
  for (int i = 0; i < m; ++i) {
    const double* arow = a + static_cast<std::size_t>(i) * k;
    double* crow = c + static_cast<std::size_t>(i) * n;
    for (int j = 0; j < n; ++j) {
      const double* brow = b + static_cast<std::size_t>(j) * k;
      __m256d acc = _mm256_setzero_pd();
      int kk = 0;
      for (; kk < k4; kk += 4) {
        __m256d av = _mm256_loadu_pd(arow + kk);
        __m256d bv = _mm256_loadu_pd(brow + kk);
        acc = _mm256_add_pd(acc, _mm256_mul_pd(av, bv));
      }
      double s = hsum(acc);
      for (; kk < k; ++kk) s += arow[kk] * brow[kk];
      crow[j] = s;
    }
  }
}

void gemm_tn(const double* a, const double* b, double* c, int m, int k, int n) {
  std::memset(c, 0, sizeof(double) * static_cast<std::size_t>(m) * n);
  const int n4 = n & ~3;
  for (int kk = 0; kk < k; ++kk) {
    const double* arow = a + static_cast<std::size_t>(kk) * m;
    const double* brow = b + static_cast<std::size_t>(kk) * n;
    for (int i = 0; i < m; ++i) {
      const double av = arow[i];
      const __m256d avv = _mm256_set1_pd(av);
      double* crow = c + static_cast<std::size_t>(i) * n;
      int j = 0;
      for (; j < n4; j += 4) {
        __m256d cj = _mm256_loadu_pd(crow + j);
        __m256d bj = _mm256_loadu_pd(brow + j);
        cj = _mm256_add_pd(cj, _mm256_mul_pd(avv, bj));
        _mm256_storeu_pd(crow + j, cj);
      }
      for (; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void add(double* dst, const double* x, const double* y, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(dst + i, _mm256_add_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  for (; i < n; ++i) dst[i] = x[i] + y[i];
}

void sub(double* dst, const double* x, const double* y, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(dst + i, _mm256_sub_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  for (; i < n; ++i) dst[i] = x[i] - y[i];
}

void mul(double* dst, const double* x, const double* y, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(dst + i, _mm256_mul_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  for (; i < n; ++i) dst[i] = x[i] * y[i];
}

void scale(double* dst, const double* x, double c, std::size_t n) {
  const __m256d cv = _mm256_set1_pd(c);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(dst + i, _mm256_mul_pd(_mm256_loadu_pd(x + i), cv));
  for (; i < n; ++i) dst[i] = x[i] * c;
}

void axpy(double* y, double a, const double* x, std::size_t n) {
  const __m256d av = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d yv = _mm256_loadu_pd(y + i);
    yv = _mm256_add_pd(yv, _mm256_mul_pd(av, _mm256_loadu_pd(x + i)));
    _mm256_storeu_pd(y + i, yv);
  }
  for (; i < n; ++i) y[i] += a * x[i];
}

double dot(const double* x, const double* y, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    acc = _mm256_add_pd(acc, _mm256_mul_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  double s = hsum(acc);
  for (; i < n; ++i) s += x[i] * y[i];
  return s;
}

double sum(const double* x, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) acc = _mm256_add_pd(acc, _mm256_loadu_pd(x + i));
  double s = hsum(acc);
  for (; i < n; ++i) s += x[i];
  return s;
}

double sumsq(const double* x, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d v = _mm256_loadu_pd(x + i);
    acc = _mm256_add_pd(acc, _mm256_mul_pd(v, v));
  }
  double s = hsum(acc);
  for (; i < n; ++i) s += x[i] * x[i];
  return s;
}

double max_value(const double* x, std::size_t n) {
  if (n < 4) {
    double m = x[0];
    for (std::size_t i = 1; i < n; ++i)
      if (x[i] > m) m = x[i];
    return m;
  }
  __m256d acc = _mm256_loadu_pd(x);
  std::size_t i = 4;
  for (; i + 4 <= n; i += 4) acc = _mm256_max_pd(acc, _mm256_loadu_pd(x + i));
  double lanes[4];
  _mm256_storeu_pd(lanes, acc);
  double m = lanes[0];
  for (int l = 1; l < 4; ++l)
    if (lanes[l] > m) m = lanes[l];
  for (; i < n; ++i)
    if (x[i] > m) m = x[i];
  return m;
}

}  // namespace avx2

const KernelTable& avx2_table() {
  static const KernelTable t = {
      avx2::gemm_nn, avx2::gemm_nt, avx2::gemm_tn, avx2::add,
      avx2::sub,     avx2::mul,     avx2::scale,   avx2::axpy,
      avx2::dot,     avx2::sum,     avx2::sumsq,   avx2::max_value,
  };
  return t;
}

}  // namespace ltt::kern::detail

#endif  // x86-64
