#ifndef LTT_TRANSFORM_HPP
#define LTT_TRANSFORM_HPP

#include <string>

#include "ltt/tensor.hpp"

// Invertible mode-3 transforms and the tensor-tensor product they induce.
// Only real transforms are supported; DFT-style complex transforms are
// rejected at construction.
namespace ltt {

struct TransformOp {
  int p = 0;
  Matrix z;      // p x p
  Matrix z_inv;  // p x p
  bool orthonormal = false;

  static TransformOp identity(int p);

  // Orthonormal DCT-II: z(k,j) = c_k cos(pi (2j+1) k / (2p)) with
  // c_0 = sqrt(1/p), c_k = sqrt(2/p) for k > 0 (0-based k, j).
  static TransformOp dct(int p);

  // User-supplied real orthogonal matrix; rejects anything with
  // max|Z Z^T - I| > tol.
  static TransformOp from_orthogonal(Matrix z, double tol = 1e-10);

  // Plain-text matrix file: one row per line, space-separated decimals.
  // Validated for orthogonality (and hence invertibility) on load.
  static TransformOp from_file(const std::string& path, double tol = 1e-10);

  // By-name factory for configs: "identity" | "dct". "dft" is rejected:
  // Fourier transforms give complex-valued slices, which this library
  // deliberately does not implement.
  static TransformOp named(const std::string& kind, int p);

  // No validation; for negative-control fixtures in tests only.
  static TransformOp unchecked(Matrix z, Matrix z_inv, bool orthonormal);
};

Tensor3 l_forward(const Tensor3& t, const TransformOp& l);  // t x_3 Z
Tensor3 l_inverse(const Tensor3& t, const TransformOp& l);  // t x_3 Z^{-1}

// Slice k of the result is a_hat(:,:,k) * b_hat(:,:,k). Runs the slice loop
// under the current SliceExec policy.
Tensor3 facewise_product(const Tensor3& a_hat, const Tensor3& b_hat);

// a *_L b = L^{-1}( L(a) facewise L(b) )
Tensor3 l_product(const Tensor3& a, const Tensor3& b, const TransformOp& l);

// L-transpose: transform-domain slices are transposed. For a real transform
// the mode-3 product commutes with the slice transpose, so this is the
// slice-wise transpose in the original domain.
Tensor3 l_transpose(const Tensor3& a, const TransformOp& l);

// Identity element of *_L on m x m x p tensors.
Tensor3 l_identity(int m, const TransformOp& l);

// Per-slice predicates in the transform domain. Off-diagonal / residual
// thresholds are tol * max(1, max|entry|) of the slice in question;
// invertibility uses the smallest per-slice singular value > tol.
bool is_l_orthogonal(const Tensor3& q, const TransformOp& l, double tol = 1e-10);
bool is_f_diagonal(const Tensor3& q, const TransformOp& l, double tol = 1e-10);
bool is_l_invertible(const Tensor3& q, const TransformOp& l, double tol = 1e-10);

}  // namespace ltt

#endif
