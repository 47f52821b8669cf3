#ifndef LTT_KERNELS_HPP
#define LTT_KERNELS_HPP

#include <cstddef>

// Dense double-precision inner loops shared by the whole library.
// Every kernel has a scalar reference implementation plus SIMD variants
// (AVX2 on x86-64, NEON on aarch64) selected once at runtime.
//
// Bit-exactness contract, relied on by the equivalence tests:
//   * element-wise kernels (add, sub, mul, scale, axpy, max_value) and the
//     k-inner gemms (gemm_nn, gemm_tn) perform the same per-element
//     operation order in every backend and must match the scalar reference
//     bit for bit;
//   * reduction kernels (dot, sum, sumsq, gemm_nt) may reassociate the
//     accumulation and are checked against the reference at tolerance.
namespace ltt::kern {

enum class Backend { Scalar, Avx2, Neon };

const char* backend_name(Backend b);
bool backend_supported(Backend b);

// Currently selected backend. Resolved on first use: best supported SIMD
// variant, overridable with the LTT_BACKEND environment variable
// (scalar|avx2|neon).
Backend active_backend();

// Force a backend (throws std::invalid_argument if unsupported here).
void set_backend(Backend b);

// c(m x n) = a(m x k) * b(k x n), all row-major, c overwritten
void gemm_nn(const double* a, const double* b, double* c, int m, int k, int n);

// c(m x n) = a(m x k) * b(n x k)^T
void gemm_nt(const double* a, const double* b, double* c, int m, int k, int n);

// c(m x n) = a(k x m)^T * b(k x n)
void gemm_tn(const double* a, const double* b, double* c, int m, int k, int n);

void add(double* dst, const double* x, const double* y, std::size_t n);
void sub(double* dst, const double* x, const double* y, std::size_t n);
void mul(double* dst, const double* x, const double* y, std::size_t n);
void scale(double* dst, const double* x, double c, std::size_t n);
void axpy(double* y, double a, const double* x, std::size_t n);  // y += a*x

double dot(const double* x, const double* y, std::size_t n);
double sum(const double* x, std::size_t n);
double sumsq(const double* x, std::size_t n);
double max_value(const double* x, std::size_t n);  // n >= 1

}  // namespace ltt::kern

#endif
