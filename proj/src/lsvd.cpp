#include "ltt/lsvd.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "ltt/parallel.hpp"

namespace ltt {

LSvdResult l_svd(const Tensor3& a, const TransformOp& l) {
  if (a.n3 != l.p) throw std::invalid_argument("l_svd: tensor depth must equal transform size");
  const int m = a.n1, n = a.n2, p = a.n3;
  const int r = std::min(m, n);

  const Tensor3 ah = l_forward(a, l);
  std::vector<SvdResult> per_slice(p);
  for_each_slice(p, [&](int k) { per_slice[k] = matrix_svd(frontal_slice(ah, k)); });

  // Canonical tube order: sort by tube l2 norm descending, stable in index.
  // With per-slice descending values this is already the case; the sort
  // pins it regardless.
  std::vector<double> tube_norm(r, 0.0);
  for (int i = 0; i < r; ++i) {
    double acc = 0.0;
    for (int k = 0; k < p; ++k) acc += per_slice[k].s[i] * per_slice[k].s[i];
    tube_norm[i] = std::sqrt(acc);
  }
  std::vector<int> order(r);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int x, int y) { return tube_norm[x] > tube_norm[y]; });

  LSvdResult res;
  res.u = Tensor3(m, m, p);
  res.s = Tensor3(m, n, p);
  res.v = Tensor3(n, n, p);
  res.slice_singulars.assign(p, std::vector<double>(r, 0.0));

  Tensor3 uh(m, m, p), sh(m, n, p), vh(n, n, p);
  for (int k = 0; k < p; ++k) {
    const SvdResult& f = per_slice[k];
    for (int i = 0; i < r; ++i) {
      const int src = order[i];
      res.slice_singulars[k][i] = f.s[src];
      sh(i, i, k) = f.s[src];
      for (int row = 0; row < m; ++row) uh(row, i, k) = f.u(row, src);
      for (int row = 0; row < n; ++row) vh(row, i, k) = f.v(row, src);
    }
    for (int i = r; i < m; ++i)
      for (int row = 0; row < m; ++row) uh(row, i, k) = f.u(row, i);
    for (int i = r; i < n; ++i)
      for (int row = 0; row < n; ++row) vh(row, i, k) = f.v(row, i);
  }
  res.u = l_inverse(uh, l);
  res.s = l_inverse(sh, l);
  res.v = l_inverse(vh, l);
  return res;
}

std::vector<double> singular_tube_norms(const LSvdResult& r) {
  const int p = static_cast<int>(r.slice_singulars.size());
  const int rank_dim = r.min_mn();
  std::vector<double> norms(rank_dim, 0.0);
  for (int i = 0; i < rank_dim; ++i) {
    double acc = 0.0;
    for (int k = 0; k < p; ++k) acc += r.slice_singulars[k][i] * r.slice_singulars[k][i];
    norms[i] = std::sqrt(acc);
  }
  return norms;
}

int tubal_rank(const LSvdResult& r, double rel_eps) {
  const std::vector<double> norms = singular_tube_norms(r);
  const double top = *std::max_element(norms.begin(), norms.end());
  if (top == 0.0) return 0;
  const double thr = rel_eps * top;
  int count = 0;
  for (double v : norms)
    if (v > thr) ++count;
  return count;
}

double average_rank(const Tensor3& a, const TransformOp& l, double tol) {
  const Tensor3 ah = l_forward(a, l);
  const int p = a.n3;
  double total = 0.0;
  for (int k = 0; k < p; ++k) {
    const SvdResult f = matrix_svd(frontal_slice(ah, k));
    const double top = f.s.empty() ? 0.0 : f.s.front();
    if (top == 0.0) continue;
    const double thr = tol * top;
    for (double sv : f.s)
      if (sv > thr) total += 1.0;
  }
  return total / p;
}

TruncatedLSvd truncated_l_svd(const Tensor3& a, const TransformOp& l, int k) {
  const int r = std::min(a.n1, a.n2);
  if (k < 1 || k > r)
    throw std::invalid_argument("truncated_l_svd: k=" + std::to_string(k) +
                                " out of range [1, " + std::to_string(r) + "]");
  const LSvdResult full = l_svd(a, l);
  const int m = a.n1, n = a.n2, p = a.n3;

  const Tensor3 uh = l_forward(full.u, l);
  const Tensor3 vh = l_forward(full.v, l);
  Tensor3 approx_h(m, n, p);
  for_each_slice(p, [&](int kk) {
    Matrix slice(m, n);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j) {
        double acc = 0.0;
        for (int t = 0; t < k; ++t)
          acc += uh(i, t, kk) * full.slice_singulars[kk][t] * vh(j, t, kk);
        slice(i, j) = acc;
      }
    set_frontal_slice(approx_h, kk, slice);
  });

  double err2 = 0.0;
  for (int t = k; t < r; ++t)
    for (int kk = 0; kk < p; ++kk)
      err2 += full.slice_singulars[kk][t] * full.slice_singulars[kk][t];

  TruncatedLSvd out;
  out.approx = l_inverse(approx_h, l);
  out.err = std::sqrt(err2);
  return out;
}

}  // namespace ltt
