#ifndef LTT_LSVD_HPP
#define LTT_LSVD_HPP

#include <vector>

#include "ltt/svd.hpp"
#include "ltt/tensor.hpp"
#include "ltt/transform.hpp"

namespace ltt {

// a = u *_L s *_L v^T with L-orthogonal u, v and f-diagonal s. Computed via
// p independent per-slice SVDs in the transform domain.
//
// Tube ordering: per-slice singular values are sorted descending, then a
// stable global permutation orders the singular tubes by l2 norm descending
// (ties keep their index order). slice_singulars[k][i] is the transform-
// domain singular value of slice k in tube position i.
struct LSvdResult {
  Tensor3 u;  // m x m x p
  Tensor3 s;  // m x n x p
  Tensor3 v;  // n x n x p
  std::vector<std::vector<double>> slice_singulars;  // [p][min(m,n)]

  int min_mn() const { return static_cast<int>(slice_singulars.at(0).size()); }
};

LSvdResult l_svd(const Tensor3& a, const TransformOp& l);

// l2 norms of the singular tubes, in tube order (non-increasing).
std::vector<double> singular_tube_norms(const LSvdResult& r);

// Number of tubes with norm above rel_eps * (largest tube norm).
int tubal_rank(const LSvdResult& r, double rel_eps = 1e-10);

// Mean over slices of the transform-domain matrix ranks, with per-slice
// relative singular-value threshold.
double average_rank(const Tensor3& a, const TransformOp& l, double tol = 1e-10);

struct TruncatedLSvd {
  Tensor3 approx;
  double err;  // ||a - approx||_F for orthonormal transforms
};

// Keeps the k largest singular tubes. err is computed from the discarded
// transform-domain singular values: err^2 = sum over dropped tubes of the
// squared per-slice values.
TruncatedLSvd truncated_l_svd(const Tensor3& a, const TransformOp& l, int k);

}  // namespace ltt

#endif
