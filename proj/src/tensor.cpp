#include "ltt/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "ltt/kernels.hpp"

namespace ltt {

namespace {

void check_finite(const std::vector<double>& v, const char* what) {
  for (double x : v)
    if (!std::isfinite(x))
      throw std::invalid_argument(std::string(what) + ": non-finite entry");
}

[[noreturn]] void shape_error(const std::string& msg) { throw std::invalid_argument(msg); }

}  // namespace

Matrix::Matrix(int r, int c) : rows(r), cols(c) {
  if (r < 1 || c < 1) shape_error("Matrix: dims must be >= 1");
  a.assign(static_cast<std::size_t>(r) * c, 0.0);
}

Matrix::Matrix(int r, int c, std::vector<double> v) : rows(r), cols(c), a(std::move(v)) {
  if (r < 1 || c < 1) shape_error("Matrix: dims must be >= 1");
  if (a.size() != static_cast<std::size_t>(r) * c)
    shape_error("Matrix: data length " + std::to_string(a.size()) + " != rows*cols");
  check_finite(a, "Matrix");
}

Matrix Matrix::identity(int n) {
  Matrix m(n, n);
  for (int i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Tensor3::Tensor3(int d1, int d2, int d3) : n1(d1), n2(d2), n3(d3) {
  if (d1 < 1 || d2 < 1 || d3 < 1) shape_error("Tensor3: dims must be >= 1, got " + dims_str());
  a.assign(static_cast<std::size_t>(d1) * d2 * d3, 0.0);
}

Tensor3::Tensor3(int d1, int d2, int d3, std::vector<double> v)
    : n1(d1), n2(d2), n3(d3), a(std::move(v)) {
  if (d1 < 1 || d2 < 1 || d3 < 1) shape_error("Tensor3: dims must be >= 1, got " + dims_str());
  if (a.size() != static_cast<std::size_t>(d1) * d2 * d3)
    shape_error("Tensor3: data length " + std::to_string(a.size()) + " != n1*n2*n3 for " +
                dims_str());
  check_finite(a, "Tensor3");
}

std::string Tensor3::dims_str() const {
  return std::to_string(n1) + "x" + std::to_string(n2) + "x" + std::to_string(n3);
}

Matrix frontal_slice(const Tensor3& t, int k) {
  if (k < 0 || k >= t.n3)
    throw std::out_of_range("frontal_slice: slice index " + std::to_string(k) +
                            " out of range for " + t.dims_str());
  Matrix m(t.n1, t.n2);
  for (int i = 0; i < t.n1; ++i)
    for (int j = 0; j < t.n2; ++j) m(i, j) = t(i, j, k);
  return m;
}

void set_frontal_slice(Tensor3& t, int k, const Matrix& s) {
  if (k < 0 || k >= t.n3)
    throw std::out_of_range("set_frontal_slice: slice index out of range");
  if (s.rows != t.n1 || s.cols != t.n2)
    throw std::invalid_argument("set_frontal_slice: slice shape mismatch");
  for (int i = 0; i < t.n1; ++i)
    for (int j = 0; j < t.n2; ++j) t(i, j, k) = s(i, j);
}

Matrix unfold(const Tensor3& t, int mode) {
  switch (mode) {
    case 1: {
      Matrix m(t.n1, t.n2 * t.n3);
      for (int i = 0; i < t.n1; ++i)
        for (int j = 0; j < t.n2; ++j)
          for (int k = 0; k < t.n3; ++k) m(i, j * t.n3 + k) = t(i, j, k);
      return m;
    }
    case 2: {
      Matrix m(t.n2, t.n1 * t.n3);
      for (int i = 0; i < t.n1; ++i)
        for (int j = 0; j < t.n2; ++j)
          for (int k = 0; k < t.n3; ++k) m(j, i * t.n3 + k) = t(i, j, k);
      return m;
    }
    case 3: {
      Matrix m(t.n3, t.n1 * t.n2);
      for (int i = 0; i < t.n1; ++i)
        for (int j = 0; j < t.n2; ++j)
          for (int k = 0; k < t.n3; ++k) m(k, i * t.n2 + j) = t(i, j, k);
      return m;
    }
    default:
      throw std::invalid_argument("unfold: mode must be 1, 2 or 3");
  }
}

Tensor3 fold(const Matrix& m, int mode, int n1, int n2, int n3) {
  Tensor3 t(n1, n2, n3);
  auto expect = [&](int rows, int cols) {
    if (m.rows != rows || m.cols != cols)
      throw std::invalid_argument("fold: matrix shape does not match target dims");
  };
  switch (mode) {
    case 1:
      expect(n1, n2 * n3);
      for (int i = 0; i < n1; ++i)
        for (int j = 0; j < n2; ++j)
          for (int k = 0; k < n3; ++k) t(i, j, k) = m(i, j * n3 + k);
      return t;
    case 2:
      expect(n2, n1 * n3);
      for (int i = 0; i < n1; ++i)
        for (int j = 0; j < n2; ++j)
          for (int k = 0; k < n3; ++k) t(i, j, k) = m(j, i * n3 + k);
      return t;
    case 3:
      expect(n3, n1 * n2);
      for (int i = 0; i < n1; ++i)
        for (int j = 0; j < n2; ++j)
          for (int k = 0; k < n3; ++k) t(i, j, k) = m(k, i * n2 + j);
      return t;
    default:
      throw std::invalid_argument("fold: mode must be 1, 2 or 3");
  }
}

Tensor3 mode_n_product(const Tensor3& t, const Matrix& x, int mode) {
  if (mode < 1 || mode > 3) throw std::invalid_argument("mode_n_product: mode must be 1, 2 or 3");
  const int dims[3] = {t.n1, t.n2, t.n3};
  if (x.cols != dims[mode - 1])
    throw std::invalid_argument("mode_n_product: X has " + std::to_string(x.cols) +
                                " cols but mode-" + std::to_string(mode) + " dim is " +
                                std::to_string(dims[mode - 1]));
  if (mode == 3) {
    // Tubes are contiguous: view t as an (n1*n2) x n3 matrix of tubes and
    // right-multiply by X^T.
    Tensor3 out(t.n1, t.n2, x.rows);
    kern::gemm_nt(t.a.data(), x.a.data(), out.a.data(), t.n1 * t.n2, t.n3, x.rows);
    return out;
  }
  const Matrix unf = unfold(t, mode);
  Matrix res(x.rows, unf.cols);
  kern::gemm_nn(x.a.data(), unf.a.data(), res.a.data(), x.rows, x.cols, unf.cols);
  int n1 = t.n1, n2 = t.n2, n3 = t.n3;
  (mode == 1 ? n1 : n2) = x.rows;
  return fold(res, mode, n1, n2, n3);
}

Tensor3 tensorize(const Matrix& x, int p) {
  if (p < 1) throw std::invalid_argument("tensorize: p must be >= 1");
  if (x.cols % p != 0)
    throw std::invalid_argument("tensorize: p=" + std::to_string(p) +
                                " does not divide d=" + std::to_string(x.cols));
  const int ds = x.cols / p;
  Tensor3 t(x.rows, ds, p);
  for (int i = 0; i < x.rows; ++i)
    for (int k = 0; k < p; ++k)
      for (int j = 0; j < ds; ++j) t(i, j, k) = x(i, k * ds + j);
  return t;
}

Matrix matricize(const Tensor3& t) {
  Matrix x(t.n1, t.n2 * t.n3);
  for (int i = 0; i < t.n1; ++i)
    for (int k = 0; k < t.n3; ++k)
      for (int j = 0; j < t.n2; ++j) x(i, k * t.n2 + j) = t(i, j, k);
  return x;
}

double frobenius_norm(const Tensor3& t) { return std::sqrt(kern::sumsq(t.a.data(), t.size())); }
double frobenius_norm(const Matrix& m) { return std::sqrt(kern::sumsq(m.a.data(), m.size())); }

Tensor3 add(const Tensor3& x, const Tensor3& y) {
  if (!x.same_dims(y)) throw std::invalid_argument("add: dims " + x.dims_str() + " vs " + y.dims_str());
  Tensor3 out(x.n1, x.n2, x.n3);
  kern::add(out.a.data(), x.a.data(), y.a.data(), x.size());
  return out;
}

Tensor3 sub(const Tensor3& x, const Tensor3& y) {
  if (!x.same_dims(y)) throw std::invalid_argument("sub: dims " + x.dims_str() + " vs " + y.dims_str());
  Tensor3 out(x.n1, x.n2, x.n3);
  kern::sub(out.a.data(), x.a.data(), y.a.data(), x.size());
  return out;
}

Tensor3 scale(const Tensor3& x, double c) {
  Tensor3 out(x.n1, x.n2, x.n3);
  kern::scale(out.a.data(), x.a.data(), c, x.size());
  return out;
}

Matrix add(const Matrix& x, const Matrix& y) {
  if (x.rows != y.rows || x.cols != y.cols) throw std::invalid_argument("add: matrix shape mismatch");
  Matrix out(x.rows, x.cols);
  kern::add(out.a.data(), x.a.data(), y.a.data(), x.size());
  return out;
}

Matrix sub(const Matrix& x, const Matrix& y) {
  if (x.rows != y.rows || x.cols != y.cols) throw std::invalid_argument("sub: matrix shape mismatch");
  Matrix out(x.rows, x.cols);
  kern::sub(out.a.data(), x.a.data(), y.a.data(), x.size());
  return out;
}

Matrix scale(const Matrix& x, double c) {
  Matrix out(x.rows, x.cols);
  kern::scale(out.a.data(), x.a.data(), c, x.size());
  return out;
}

Matrix matmul(const Matrix& x, const Matrix& y) {
  if (x.cols != y.rows)
    throw std::invalid_argument("matmul: inner dims " + std::to_string(x.cols) + " vs " +
                                std::to_string(y.rows));
  Matrix out(x.rows, y.cols);
  kern::gemm_nn(x.a.data(), y.a.data(), out.a.data(), x.rows, x.cols, y.cols);
  return out;
}

Matrix transpose(const Matrix& x) {
  Matrix out(x.cols, x.rows);
  for (int i = 0; i < x.rows; ++i)
    for (int j = 0; j < x.cols; ++j) out(j, i) = x(i, j);
  return out;
}

double max_abs_diff(const Tensor3& x, const Tensor3& y) {
  if (!x.same_dims(y)) throw std::invalid_argument("max_abs_diff: shape mismatch");
  double m = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) m = std::max(m, std::fabs(x.a[i] - y.a[i]));
  return m;
}

double max_abs_diff(const Matrix& x, const Matrix& y) {
  if (x.rows != y.rows || x.cols != y.cols) throw std::invalid_argument("max_abs_diff: shape mismatch");
  double m = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) m = std::max(m, std::fabs(x.a[i] - y.a[i]));
  return m;
}

double rel_error(const Tensor3& x, const Tensor3& y) {
  return frobenius_norm(sub(x, y)) / std::max(frobenius_norm(y), 1e-300);
}

double rel_error(const Matrix& x, const Matrix& y) {
  return frobenius_norm(sub(x, y)) / std::max(frobenius_norm(y), 1e-300);
}

bool has_non_finite(const Tensor3& t) {
  for (double v : t.a)
    if (!std::isfinite(v)) return true;
  return false;
}

// --- Rng -------------------------------------------------------------------

namespace {
inline std::uint64_t splitmix64(std::uint64_t& x) {
  x += 0x9e3779b97f4a7c15ull;
  std::uint64_t z = x;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}
inline std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
}  // namespace

Rng::Rng(std::uint64_t seed) {
  std::uint64_t sm = seed;
  for (auto& s : s_) s = splitmix64(sm);
}

std::uint64_t Rng::next_u64() {
  const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
  const std::uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

double Rng::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

int Rng::uniform_int(int n) {
  // modulo bias is negligible for desk-scale n
  return static_cast<int>(next_u64() % static_cast<std::uint64_t>(n));
}

double Rng::normal() {
  if (have_spare_) {
    have_spare_ = false;
    return spare_;
  }
  double u1 = uniform();
  while (u1 <= 1e-300) u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 6.283185307179586476925286766559 * u2;
  spare_ = r * std::sin(theta);
  have_spare_ = true;
  return r * std::cos(theta);
}

Tensor3 random_tensor(int n1, int n2, int n3, Rng& rng, double lo, double hi) {
  Tensor3 t(n1, n2, n3);
  for (auto& v : t.a) v = rng.uniform(lo, hi);
  return t;
}

Matrix random_matrix(int r, int c, Rng& rng, double lo, double hi) {
  Matrix m(r, c);
  for (auto& v : m.a) v = rng.uniform(lo, hi);
  return m;
}

}  // namespace ltt
