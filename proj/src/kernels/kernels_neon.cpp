// NEON variants (aarch64). Mirrors the AVX2 file two lanes wide; same
// bit-exactness split: vmulq+vaddq (no fused ops) for the order-preserving
// kernels, lane-wise partial sums for the reductions.

#if defined(__aarch64__)

#include <arm_neon.h>

#include <cstring>

#include "kernels_impl.hpp"

namespace ltt::kern::detail {
namespace neon {

inline double hsum(float64x2_t v) { return vgetq_lane_f64(v, 0) + vgetq_lane_f64(v, 1); }

void gemm_nn(const double* a, const double* b, double* c, int m, int k, int n) {
  std::memset(c, 0, sizeof(double) * static_cast<std::size_t>(m) * n);
  const int n2 = n & ~1;
  for (int i = 0; i < m; ++i) {
    const double* arow = a + static_cast<std::size_t>(i) * k;
    double* crow = c + static_cast<std::size_t>(i) * n;
    for (int kk = 0; kk < k; ++kk) {
      const double av = arow[kk];
      const float64x2_t avv = vdupq_n_f64(av);
      const double* brow = b + static_cast<std::size_t>(kk) * n;
      int j = 0;
      for (; j < n2; j += 2) {
        float64x2_t cj = vld1q_f64(crow + j);
        cj = vaddq_f64(cj, vmulq_f64(avv, vld1q_f64(brow + j)));
        vst1q_f64(crow + j, cj);
      }
      for (; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void gemm_nt(const double* a, const double* b, double* c, int m, int k, int n) {
  const int k2 = k & ~1;
  for (int i = 0; i < m; ++i) {
    const double* arow = a + static_cast<std::size_t>(i) * k;
    double* crow = c + static_cast<std::size_t>(i) * n;
    for (int j = 0; j < n; ++j) {
      const double* brow = b + static_cast<std::size_t>(j) * k;
      float64x2_t acc = vdupq_n_f64(0.0);
      int kk = 0;
      for (; kk < k2; kk += 2)
        acc = vaddq_f64(acc, vmulq_f64(vld1q_f64(arow + kk), vld1q_f64(brow + kk)));
      double s = hsum(acc);
      for (; kk < k; ++kk) s += arow[kk] * brow[kk];
      crow[j] = s;
    }
  }
}

void gemm_tn(const double* a, const double* b, double* c, int m, int k, int n) {
  std::memset(c, 0, sizeof(double) * static_cast<std::size_t>(m) * n);
  const int n2 = n & ~1;
  for (int kk = 0; kk < k; ++kk) {
    const double* arow = a + static_cast<std::size_t>(kk) * m;
    const double* brow = b + static_cast<std::size_t>(kk) * n;
    for (int i = 0; i < m; ++i) {
      const double av = arow[i];
      const float64x2_t avv = vdupq_n_f64(av);
      double* crow = c + static_cast<std::size_t>(i) * n;
      int j = 0;
      for (; j < n2; j += 2) {
        float64x2_t cj = vld1q_f64(crow + j);
        cj = vaddq_f64(cj, vmulq_f64(avv, vld1q_f64(brow + j)));
        vst1q_f64(crow + j, cj);
      }
      for (; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void add(double* dst, const double* x, const double* y, std::size_t n) {
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) vst1q_f64(dst + i, vaddq_f64(vld1q_f64(x + i), vld1q_f64(y + i)));
  for (; i < n; ++i) dst[i] = x[i] + y[i];
}

void sub(double* dst, const double* x, const double* y, std::size_t n) {
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) vst1q_f64(dst + i, vsubq_f64(vld1q_f64(x + i), vld1q_f64(y + i)));
  for (; i < n; ++i) dst[i] = x[i] - y[i];
}

void mul(double* dst, const double* x, const double* y, std::size_t n) {
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) vst1q_f64(dst + i, vmulq_f64(vld1q_f64(x + i), vld1q_f64(y + i)));
  for (; i < n; ++i) dst[i] = x[i] * y[i];
}

void scale(double* dst, const double* x, double c, std::size_t n) {
  const float64x2_t cv = vdupq_n_f64(c);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) vst1q_f64(dst + i, vmulq_f64(vld1q_f64(x + i), cv));
  for (; i < n; ++i) dst[i] = x[i] * c;
}

void axpy(double* y, double a, const double* x, std::size_t n) {
  const float64x2_t av = vdupq_n_f64(a);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    float64x2_t yv = vld1q_f64(y + i);
    yv = vaddq_f64(yv, vmulq_f64(av, vld1q_f64(x + i)));
    vst1q_f64(y + i, yv);
  }
  for (; i < n; ++i) y[i] += a * x[i];
}

double dot(const double* x, const double* y, std::size_t n) {
  float64x2_t acc = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2)
    acc = vaddq_f64(acc, vmulq_f64(vld1q_f64(x + i), vld1q_f64(y + i)));
  double s = hsum(acc);
  for (; i < n; ++i) s += x[i] * y[i];
  return s;
}

double sum(const double* x, std::size_t n) {
  float64x2_t acc = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) acc = vaddq_f64(acc, vld1q_f64(x + i));
  double s = hsum(acc);
  for (; i < n; ++i) s += x[i];
  return s;
}

double sumsq(const double* x, std::size_t n) {
  float64x2_t acc = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    float64x2_t v = vld1q_f64(x + i);
    acc = vaddq_f64(acc, vmulq_f64(v, v));
  }
  double s = hsum(acc);
  for (; i < n; ++i) s += x[i] * x[i];
  return s;
}

double max_value(const double* x, std::size_t n) {
  double m = x[0];
  std::size_t i = 1;
  if (n >= 2) {
    float64x2_t acc = vld1q_f64(x);
    i = 2;
    for (; i + 2 <= n; i += 2) acc = vmaxq_f64(acc, vld1q_f64(x + i));
    m = vgetq_lane_f64(acc, 0);
    const double m1 = vgetq_lane_f64(acc, 1);
    if (m1 > m) m = m1;
  }
  for (; i < n; ++i)
    if (x[i] > m) m = x[i];
  return m;
}

}  // namespace neon

const KernelTable& neon_table() {
  static const KernelTable t = {
      neon::gemm_nn, neon::gemm_nt, neon::gemm_tn, neon::add,
      neon::sub,     neon::mul,     neon::scale,   neon::axpy,
      neon::dot,     neon::sum,     neon::sumsq,   neon::max_value,
  };
  return t;
}

}  // namespace ltt::kern::detail

#endif  // aarch64
