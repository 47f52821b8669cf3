#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "ltt/kernels.hpp"
#include "ltt/tensor.hpp"

using namespace ltt;

namespace {

// triple-loop oracle, independent of the kernel implementations
std::vector<double> gemm_oracle(const std::vector<double>& a, const std::vector<double>& b,
                                int m, int k, int n, char ta, char tb) {
  std::vector<double> c(static_cast<std::size_t>(m) * n, 0.0);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) {
      double acc = 0.0;
      for (int kk = 0; kk < k; ++kk) {
        const double av = (ta == 'n') ? a[static_cast<std::size_t>(i) * k + kk]
                                      : a[static_cast<std::size_t>(kk) * m + i];
        const double bv = (tb == 'n') ? b[static_cast<std::size_t>(kk) * n + j]
                                      : b[static_cast<std::size_t>(j) * k + kk];
        acc += av * bv;
      }
      c[static_cast<std::size_t>(i) * n + j] = acc;
    }
  return c;
}

std::vector<double> rand_vec(std::size_t n, Rng& rng) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(-1.0, 1.0);
  return v;
}

double rel_diff(const std::vector<double>& x, const std::vector<double>& y) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    num += (x[i] - y[i]) * (x[i] - y[i]);
    den += y[i] * y[i];
  }
  return std::sqrt(num) / std::max(std::sqrt(den), 1e-300);
}

struct BackendGuard {
  kern::Backend saved = kern::active_backend();
  ~BackendGuard() { kern::set_backend(saved); }
};

}  // namespace

TEST_CASE("scalar gemm variants match the triple-loop oracle") {
  BackendGuard guard;
  kern::set_backend(kern::Backend::Scalar);
  Rng rng(11);
  const std::vector<std::array<int, 3>> shapes = {{1, 1, 1}, {3, 5, 4}, {7, 2, 9}, {8, 8, 8}};
  for (auto [m, k, n] : shapes) {
    auto a = rand_vec(static_cast<std::size_t>(m) * k, rng);
    auto b = rand_vec(static_cast<std::size_t>(k) * n, rng);
    std::vector<double> c(static_cast<std::size_t>(m) * n);

    kern::gemm_nn(a.data(), b.data(), c.data(), m, k, n);
    CHECK(rel_diff(c, gemm_oracle(a, b, m, k, n, 'n', 'n')) < 1e-14);

    auto bt = rand_vec(static_cast<std::size_t>(n) * k, rng);
    kern::gemm_nt(a.data(), bt.data(), c.data(), m, k, n);
    CHECK(rel_diff(c, gemm_oracle(a, bt, m, k, n, 'n', 't')) < 1e-14);

    auto at = rand_vec(static_cast<std::size_t>(k) * m, rng);
    kern::gemm_tn(at.data(), b.data(), c.data(), m, k, n);
    CHECK(rel_diff(c, gemm_oracle(at, b, m, k, n, 't', 'n')) < 1e-14);
  }
}

TEST_CASE("simd backends agree with the scalar reference") {
  BackendGuard guard;
  const kern::Backend simd_candidates[] = {kern::Backend::Avx2, kern::Backend::Neon};
  int tested = 0;
  for (kern::Backend be : simd_candidates) {
    if (!kern::backend_supported(be)) continue;
    ++tested;
    Rng rng(42);
    // odd lengths exercise the vector tails
    for (std::size_t n : {std::size_t(1), std::size_t(2), std::size_t(3), std::size_t(4),
                          std::size_t(5), std::size_t(7), std::size_t(8), std::size_t(13),
                          std::size_t(31), std::size_t(64), std::size_t(257)}) {
      auto x = rand_vec(n, rng);
      auto y = rand_vec(n, rng);
      std::vector<double> r_scalar(n), r_simd(n);

      // element-wise kernels keep the per-element operation order: bit-exact
      kern::set_backend(kern::Backend::Scalar);
      kern::add(r_scalar.data(), x.data(), y.data(), n);
      kern::set_backend(be);
      kern::add(r_simd.data(), x.data(), y.data(), n);
      CHECK(r_scalar == r_simd);

      kern::set_backend(kern::Backend::Scalar);
      kern::sub(r_scalar.data(), x.data(), y.data(), n);
      kern::set_backend(be);
      kern::sub(r_simd.data(), x.data(), y.data(), n);
      CHECK(r_scalar == r_simd);

      kern::set_backend(kern::Backend::Scalar);
      kern::mul(r_scalar.data(), x.data(), y.data(), n);
      kern::set_backend(be);
      kern::mul(r_simd.data(), x.data(), y.data(), n);
      CHECK(r_scalar == r_simd);

      kern::set_backend(kern::Backend::Scalar);
      kern::scale(r_scalar.data(), x.data(), 1.7, n);
      kern::set_backend(be);
      kern::scale(r_simd.data(), x.data(), 1.7, n);
      CHECK(r_scalar == r_simd);

      r_scalar = y;
      r_simd = y;
      kern::set_backend(kern::Backend::Scalar);
      kern::axpy(r_scalar.data(), 0.3, x.data(), n);
      kern::set_backend(be);
      kern::axpy(r_simd.data(), 0.3, x.data(), n);
      CHECK(r_scalar == r_simd);

      kern::set_backend(kern::Backend::Scalar);
      const double mx_s = kern::max_value(x.data(), n);
      kern::set_backend(be);
      CHECK(kern::max_value(x.data(), n) == mx_s);

      // reductions may reassociate: tolerance check
      kern::set_backend(kern::Backend::Scalar);
      const double dot_s = kern::dot(x.data(), y.data(), n);
      const double sum_s = kern::sum(x.data(), n);
      const double ssq_s = kern::sumsq(x.data(), n);
      kern::set_backend(be);
      CHECK(std::fabs(kern::dot(x.data(), y.data(), n) - dot_s) <=
            1e-13 * std::max(1.0, std::fabs(dot_s)));
      CHECK(std::fabs(kern::sum(x.data(), n) - sum_s) <= 1e-13 * std::max(1.0, std::fabs(sum_s)));
      CHECK(std::fabs(kern::sumsq(x.data(), n) - ssq_s) <= 1e-13 * ssq_s + 1e-300);
    }

    const std::vector<std::array<int, 3>> shapes = {
        {1, 1, 1}, {3, 5, 4}, {7, 2, 9}, {5, 13, 6}, {16, 16, 16}, {9, 31, 7}};
    for (auto [m, k, n] : shapes) {
      auto a = rand_vec(static_cast<std::size_t>(m) * k, rng);
      auto b = rand_vec(static_cast<std::size_t>(k) * n, rng);
      auto bt = rand_vec(static_cast<std::size_t>(n) * k, rng);
      auto at = rand_vec(static_cast<std::size_t>(k) * m, rng);
      std::vector<double> c_scalar(static_cast<std::size_t>(m) * n);
      std::vector<double> c_simd(static_cast<std::size_t>(m) * n);

      // k-inner gemms preserve per-element accumulation order: bit-exact
      kern::set_backend(kern::Backend::Scalar);
      kern::gemm_nn(a.data(), b.data(), c_scalar.data(), m, k, n);
      kern::set_backend(be);
      kern::gemm_nn(a.data(), b.data(), c_simd.data(), m, k, n);
      CHECK(c_scalar == c_simd);

      kern::set_backend(kern::Backend::Scalar);
      kern::gemm_tn(at.data(), b.data(), c_scalar.data(), m, k, n);
      kern::set_backend(be);
      kern::gemm_tn(at.data(), b.data(), c_simd.data(), m, k, n);
      CHECK(c_scalar == c_simd);

      // dot-product gemm reassociates
      kern::set_backend(kern::Backend::Scalar);
      kern::gemm_nt(a.data(), bt.data(), c_scalar.data(), m, k, n);
      kern::set_backend(be);
      kern::gemm_nt(a.data(), bt.data(), c_simd.data(), m, k, n);
      CHECK(rel_diff(c_simd, c_scalar) < 1e-13);
    }
  }
  if (tested == 0)
    MESSAGE("no SIMD backend on this host, scalar-only run");
}

TEST_CASE("backend selection is sticky and validated") {
  BackendGuard guard;
  kern::set_backend(kern::Backend::Scalar);
  CHECK(kern::active_backend() == kern::Backend::Scalar);
  CHECK(kern::backend_supported(kern::Backend::Scalar));
#if !defined(__aarch64__)
  CHECK_THROWS_AS(kern::set_backend(kern::Backend::Neon), std::invalid_argument);
#endif
}
