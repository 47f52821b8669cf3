#ifndef LTT_KERNELS_IMPL_HPP
#define LTT_KERNELS_IMPL_HPP

#include <cstddef>

namespace ltt::kern::detail {

struct KernelTable {
  void (*gemm_nn)(const double*, const double*, double*, int, int, int);
  void (*gemm_nt)(const double*, const double*, double*, int, int, int);
  void (*gemm_tn)(const double*, const double*, double*, int, int, int);
  void (*add)(double*, const double*, const double*, std::size_t);
  void (*sub)(double*, const double*, const double*, std::size_t);
  void (*mul)(double*, const double*, const double*, std::size_t);
  void (*scale)(double*, const double*, double, std::size_t);
  void (*axpy)(double*, double, const double*, std::size_t);
  double (*dot)(const double*, const double*, std::size_t);
  double (*sum)(const double*, std::size_t);
  double (*sumsq)(const double*, std::size_t);
  double (*max_value)(const double*, std::size_t);
};

const KernelTable& scalar_table();

#if defined(__x86_64__) || defined(_M_X64)
const KernelTable& avx2_table();
#endif
#if defined(__aarch64__)
const KernelTable& neon_table();
#endif

}  // namespace ltt::kern::detail

#endif
