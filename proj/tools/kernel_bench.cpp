// Throughput comparison of the scalar reference kernels against the active
// SIMD backend. Informational only; correctness is covered by the
// equivalence tests.

#include <chrono>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "ltt/kernels.hpp"
#include "ltt/tensor.hpp"

using namespace ltt;

namespace {

double time_best_of(int tries, const std::function<void()>& fn) {
  double best = 1e300;
  for (int i = 0; i < tries; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    const double s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    best = std::min(best, s);
  }
  return best;
}

void bench_backend(kern::Backend be, int n, const std::vector<double>& a,
                   const std::vector<double>& b, std::vector<double>& c) {
  kern::set_backend(be);
  const double flops = 2.0 * n * n * n;
  const int reps = std::max(1, static_cast<int>(2e8 / flops));

  const double t_nn = time_best_of(3, [&] {
    for (int r = 0; r < reps; ++r) kern::gemm_nn(a.data(), b.data(), c.data(), n, n, n);
  });
  const double t_nt = time_best_of(3, [&] {
    for (int r = 0; r < reps; ++r) kern::gemm_nt(a.data(), b.data(), c.data(), n, n, n);
  });
  double sink = 0.0;
  const std::size_t len = a.size();
  const double t_dot = time_best_of(3, [&] {
    for (int r = 0; r < reps * 8; ++r) sink += kern::dot(a.data(), b.data(), len);
  });
  std::printf("  %-6s  gemm_nn %7.2f GF/s   gemm_nt %7.2f GF/s   dot %7.2f GF/s%s\n",
              kern::backend_name(be), flops * reps / t_nn * 1e-9,
              flops * reps / t_nt * 1e-9, 2.0 * len * reps * 8 / t_dot * 1e-9,
              sink == 12345.0 ? "!" : "");
}

}  // namespace

int main() {
  const kern::Backend detected = kern::active_backend();
  std::printf("detected backend: %s\n", kern::backend_name(detected));
  Rng rng(1);
  for (int n : {16, 64, 256}) {
    std::printf("n = %d\n", n);
    std::vector<double> a(static_cast<std::size_t>(n) * n), b(a.size()), c(a.size());
    for (auto& v : a) v = rng.uniform(-1, 1);
    for (auto& v : b) v = rng.uniform(-1, 1);
    bench_backend(kern::Backend::Scalar, n, a, b, c);
    if (detected != kern::Backend::Scalar) bench_backend(detected, n, a, b, c);
  }
  kern::set_backend(detected);
  return 0;
}
