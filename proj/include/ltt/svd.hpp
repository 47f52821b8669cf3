#ifndef LTT_SVD_HPP
#define LTT_SVD_HPP

#include <vector>

#include "ltt/tensor.hpp"

namespace ltt {

struct SvdResult {
  Matrix u;               // m x m, orthonormal
  std::vector<double> s;  // min(m,n) singular values, descending, >= 0
  Matrix v;               // n x n, orthonormal
};

// Full SVD of a dense matrix, A = U diag(s) V^T, via one-sided Jacobi
// (cyclic sweeps, tolerance 1e-13, at most 30 sweeps). Deterministic:
// singular values sorted descending, each U column's largest-magnitude
// entry made positive. Throws std::runtime_error with the residual if the
// sweep limit is hit.
SvdResult matrix_svd(const Matrix& a);

}  // namespace ltt

#endif
