#include "ltt/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <cstring>
#include <stdexcept>
#include <string>

#include "kernels_impl.hpp"

namespace ltt::kern {
namespace detail {

// ---------------------------------------------------------------------------
// Scalar reference kernels. These define the semantics; SIMD variants are
// tested against them.
// ---------------------------------------------------------------------------
namespace scalar {

// i-outer, k-middle, j-inner: each c[i][j] accumulates in ascending k order.
void gemm_nn(const double* a, const double* b, double* c, int m, int k, int n) {
  std::memset(c, 0, sizeof(double) * static_cast<std::size_t>(m) * n);
  for (int i = 0; i < m; ++i) {
    const double* arow = a + static_cast<std::size_t>(i) * k;
    double* crow = c + static_cast<std::size_t>(i) * n;
    for (int kk = 0; kk < k; ++kk) {
      const double av = arow[kk];
      const double* brow = b + static_cast<std::size_t>(kk) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void gemm_nt(const double* a, const double* b, double* c, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    const double* arow = a + static_cast<std::size_t>(i) * k;
    double* crow = c + static_cast<std::size_t>(i) * n;
    for (int j = 0; j < n; ++j) {
      const double* brow = b + static_cast<std::size_t>(j) * k;
      double acc = 0.0;
      for (int kk = 0; kk < k; ++kk) acc += arow[kk] * brow[kk];
      crow[j] = acc;
    }
  }
}

// k-outer so c[i][j] accumulates in ascending k order, same as gemm_nn.
void gemm_tn(const double* a, const double* b, double* c, int m, int k, int n) {
  std::memset(c, 0, sizeof(double) * static_cast<std::size_t>(m) * n);
  for (int kk = 0; kk < k; ++kk) {
    const double* arow = a + static_cast<std::size_t>(kk) * m;
    const double* brow = b + static_cast<std::size_t>(kk) * n;
    for (int i = 0; i < m; ++i) {
      const double av = arow[i];
      double* crow = c + static_cast<std::size_t>(i) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void add(double* dst, const double* x, const double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) dst[i] = x[i] + y[i];
}
void sub(double* dst, const double* x, const double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) dst[i] = x[i] - y[i];
}
void mul(double* dst, const double* x, const double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) dst[i] = x[i] * y[i];
}
void scale(double* dst, const double* x, double c, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) dst[i] = x[i] * c;
}
void axpy(double* y, double a, const double* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

double dot(const double* x, const double* y, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += x[i] * y[i];
  return acc;
}
double sum(const double* x, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += x[i];
  return acc;
}
double sumsq(const double* x, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += x[i] * x[i];
  return acc;
}
double max_value(const double* x, std::size_t n) {
  double m = x[0];
  for (std::size_t i = 1; i < n; ++i)
    if (x[i] > m) m = x[i];
  return m;
}

}  // namespace scalar

const KernelTable& scalar_table() {
  static const KernelTable t = {
      scalar::gemm_nn, scalar::gemm_nt, scalar::gemm_tn, scalar::add,
      scalar::sub,     scalar::mul,     scalar::scale,   scalar::axpy,
      scalar::dot,     scalar::sum,     scalar::sumsq,   scalar::max_value,
  };
  return t;
}

}  // namespace detail

namespace {

std::atomic<const detail::KernelTable*> g_table{nullptr};
std::atomic<Backend> g_backend{Backend::Scalar};

const detail::KernelTable* table_for(Backend b) {
  switch (b) {
    case Backend::Scalar:
      return &detail::scalar_table();
    case Backend::Avx2:
#if defined(__x86_64__) || defined(_M_X64)
      if (__builtin_cpu_supports("avx2")) return &detail::avx2_table();
#endif
      return nullptr;
    case Backend::Neon:
#if defined(__aarch64__)
      return &detail::neon_table();
#else
      return nullptr;
#endif
  }
  return nullptr;
}

Backend detect_backend() {
  if (const char* env = std::getenv("LTT_BACKEND")) {
    const std::string s(env);
    if (s == "scalar") return Backend::Scalar;
    if (s == "avx2" && table_for(Backend::Avx2)) return Backend::Avx2;
    if (s == "neon" && table_for(Backend::Neon)) return Backend::Neon;
    // Unknown or unsupported request falls through to auto-detection.
  }
#if defined(__aarch64__)
  return Backend::Neon;
#else
  if (table_for(Backend::Avx2)) return Backend::Avx2;
  return Backend::Scalar;
#endif
}

const detail::KernelTable& table() {
  const detail::KernelTable* t = g_table.load(std::memory_order_acquire);
  if (!t) {
    const Backend b = detect_backend();
    t = table_for(b);
    g_backend.store(b, std::memory_order_relaxed);
    g_table.store(t, std::memory_order_release);
  }
  return *t;
}

}  // namespace

const char* backend_name(Backend b) {
  switch (b) {
    case Backend::Scalar: return "scalar";
    case Backend::Avx2: return "avx2";
    case Backend::Neon: return "neon";
  }
  return "?";
}

bool backend_supported(Backend b) { return table_for(b) != nullptr; }

Backend active_backend() {
  table();
  return g_backend.load(std::memory_order_relaxed);
}

void set_backend(Backend b) {
  const detail::KernelTable* t = table_for(b);
  if (!t)
    throw std::invalid_argument(std::string("kernel backend not supported on this cpu: ") +
                                backend_name(b));
  g_backend.store(b, std::memory_order_relaxed);
  g_table.store(t, std::memory_order_release);
}

void gemm_nn(const double* a, const double* b, double* c, int m, int k, int n) {
  table().gemm_nn(a, b, c, m, k, n);
}
void gemm_nt(const double* a, const double* b, double* c, int m, int k, int n) {
  table().gemm_nt(a, b, c, m, k, n);
}
void gemm_tn(const double* a, const double* b, double* c, int m, int k, int n) {
  table().gemm_tn(a, b, c, m, k, n);
}
void add(double* dst, const double* x, const double* y, std::size_t n) {
  table().add(dst, x, y, n);
}
void sub(double* dst, const double* x, const double* y, std::size_t n) {
  table().sub(dst, x, y, n);
}
void mul(double* dst, const double* x, const double* y, std::size_t n) {
  table().mul(dst, x, y, n);
}
void scale(double* dst, const double* x, double c, std::size_t n) {
  table().scale(dst, x, c, n);
}
void axpy(double* y, double a, const double* x, std::size_t n) { table().axpy(y, a, x, n); }
double dot(const double* x, const double* y, std::size_t n) { return table().dot(x, y, n); }
double sum(const double* x, std::size_t n) { return table().sum(x, n); }
double sumsq(const double* x, std::size_t n) { return table().sumsq(x, n); }
double max_value(const double* x, std::size_t n) { return table().max_value(x, n); }

}  // namespace ltt::kern
