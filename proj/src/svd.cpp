#include "ltt/svd.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace ltt {

namespace {

constexpr double kJacobiTol = 1e-13;
constexpr int kMaxSweeps = 30;

// One-sided Jacobi on the columns of W (m x n, m >= n assumed by caller).
// On return the columns of W are mutually orthogonal and V accumulates the
// right rotations: A = W_final * V^T.
void jacobi_orthogonalize(Matrix& w, Matrix& v) {
  const int m = w.rows, n = w.cols;
  double worst = 0.0;
  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    bool rotated = false;
    worst = 0.0;
    for (int p = 0; p < n - 1; ++p) {
      for (int q = p + 1; q < n; ++q) {
        double app = 0.0, aqq = 0.0, apq = 0.0;
        for (int i = 0; i < m; ++i) {
          const double wp = w(i, p), wq = w(i, q);
          app += wp * wp;
          aqq += wq * wq;
          apq += wp * wq;
        }
        if (app == 0.0 || aqq == 0.0) continue;
        const double off = std::fabs(apq) / std::sqrt(app * aqq);
        worst = std::max(worst, off);
        if (off <= kJacobiTol) continue;
        const double zeta = (aqq - app) / (2.0 * apq);
        const double t = (zeta >= 0.0 ? 1.0 : -1.0) /
                         (std::fabs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double cs = 1.0 / std::sqrt(1.0 + t * t);
        const double sn = cs * t;
        for (int i = 0; i < m; ++i) {
          const double wp = w(i, p), wq = w(i, q);
          w(i, p) = cs * wp - sn * wq;
          w(i, q) = sn * wp + cs * wq;
        }
        for (int i = 0; i < n; ++i) {
          const double vp = v(i, p), vq = v(i, q);
          v(i, p) = cs * vp - sn * vq;
          v(i, q) = sn * vp + cs * vq;
        }
        rotated = true;
      }
    }
    if (!rotated) return;
  }
  throw std::runtime_error("matrix_svd: Jacobi sweeps did not converge, residual " +
                           std::to_string(worst));
}

// Appends orthonormal columns to u (m x m) starting at column `from`, chosen
// deterministically from the coordinate basis.
void complete_basis(Matrix& u, int from) {
  const int m = u.rows;
  int col = from;
  for (int cand = 0; cand < m && col < m; ++cand) {
    std::vector<double> x(m, 0.0);
    x[cand] = 1.0;
    for (int pass = 0; pass < 2; ++pass) {  // re-orthogonalize once
      for (int j = 0; j < col; ++j) {
        double proj = 0.0;
        for (int i = 0; i < m; ++i) proj += x[i] * u(i, j);
        for (int i = 0; i < m; ++i) x[i] -= proj * u(i, j);
      }
    }
    double nrm = 0.0;
    for (double xi : x) nrm += xi * xi;
    nrm = std::sqrt(nrm);
    if (nrm < 0.05) continue;  // candidate nearly in span, try next
    for (int i = 0; i < m; ++i) u(i, col) = x[i] / nrm;
    ++col;
  }
  if (col < m) throw std::runtime_error("matrix_svd: basis completion failed");
}

SvdResult svd_tall(const Matrix& a) {
  const int m = a.rows, n = a.cols;
  Matrix w = a;
  Matrix v = Matrix::identity(n);
  jacobi_orthogonalize(w, v);

  std::vector<double> sig(n);
  for (int j = 0; j < n; ++j) {
    double s2 = 0.0;
    for (int i = 0; i < m; ++i) s2 += w(i, j) * w(i, j);
    sig[j] = std::sqrt(s2);
  }

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int x, int y) { return sig[x] > sig[y]; });

  SvdResult r;
  r.u = Matrix(m, m);
  r.v = Matrix(n, n);
  r.s.resize(n);
  const double smax = sig.empty() ? 0.0 : sig[order[0]];
  const double tiny = std::max(smax, 1.0) * 1e-300;
  int filled = 0;
  for (int j = 0; j < n; ++j) {
    const int src = order[j];
    r.s[j] = sig[src];
    for (int i = 0; i < n; ++i) r.v(i, j) = v(i, src);
    if (sig[src] > tiny) {
      for (int i = 0; i < m; ++i) r.u(i, j) = w(i, src) / sig[src];
      filled = j + 1;
    } else {
      r.s[j] = 0.0;
    }
  }
  complete_basis(r.u, filled);
  return r;
}

// Sign convention: largest-magnitude entry of each U column positive; paired
// V columns flip along so U S V^T is unchanged.
void fix_signs(SvdResult& r) {
  const int m = r.u.rows, n = r.v.rows;
  const int minmn = std::min(m, n);
  for (int j = 0; j < m; ++j) {
    int arg = 0;
    double best = 0.0;
    for (int i = 0; i < m; ++i) {
      const double v2 = std::fabs(r.u(i, j));
      if (v2 > best) {
        best = v2;
        arg = i;
      }
    }
    if (r.u(arg, j) < 0.0) {
      for (int i = 0; i < m; ++i) r.u(i, j) = -r.u(i, j);
      if (j < minmn)
        for (int i = 0; i < n; ++i) r.v(i, j) = -r.v(i, j);
    }
  }
}

}  // namespace

SvdResult matrix_svd(const Matrix& a) {
  for (double x : a.a)
    if (!std::isfinite(x)) throw std::invalid_argument("matrix_svd: non-finite entry");
  SvdResult r;
  if (a.rows >= a.cols) {
    r = svd_tall(a);
  } else {
    SvdResult t = svd_tall(transpose(a));
    r.u = std::move(t.v);
    r.v = std::move(t.u);
    r.s = std::move(t.s);
  }
  fix_signs(r);
  return r;
}

}  // namespace ltt
