#include "ltt/transform.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "ltt/kernels.hpp"
#include "ltt/parallel.hpp"
#include "ltt/svd.hpp"

namespace ltt {

namespace {

double max_abs_residual_zzt(const Matrix& z) {
  const int p = z.rows;
  Matrix zt = transpose(z);
  Matrix prod = matmul(z, zt);
  double worst = 0.0;
  for (int i = 0; i < p; ++i)
    for (int j = 0; j < p; ++j)
      worst = std::max(worst, std::fabs(prod(i, j) - (i == j ? 1.0 : 0.0)));
  return worst;
}

}  // namespace

TransformOp TransformOp::identity(int p) {
  if (p < 1) throw std::invalid_argument("TransformOp: p must be >= 1");
  TransformOp l;
  l.p = p;
  l.z = Matrix::identity(p);
  l.z_inv = l.z;
  l.orthonormal = true;
  return l;
}

TransformOp TransformOp::dct(int p) {
  if (p < 1) throw std::invalid_argument("TransformOp: p must be >= 1");
  Matrix z(p, p);
  const double pi = 3.14159265358979323846264338327950288;
  for (int k = 0; k < p; ++k) {
    const double ck = std::sqrt((k == 0 ? 1.0 : 2.0) / p);
    for (int j = 0; j < p; ++j)
      z(k, j) = ck * std::cos(pi * (2.0 * j + 1.0) * k / (2.0 * p));
  }
  TransformOp l;
  l.p = p;
  l.z_inv = transpose(z);
  l.z = std::move(z);
  l.orthonormal = true;
  return l;
}

TransformOp TransformOp::from_orthogonal(Matrix z, double tol) {
  if (z.rows != z.cols) throw std::invalid_argument("TransformOp: matrix must be square");
  const double resid = max_abs_residual_zzt(z);
  if (resid > tol)
    throw std::invalid_argument(
        "TransformOp: matrix is not orthogonal (max|ZZ^T - I| = " + std::to_string(resid) +
        "); only real orthogonal transforms are supported");
  TransformOp l;
  l.p = z.rows;
  l.z_inv = transpose(z);
  l.z = std::move(z);
  l.orthonormal = true;
  return l;
}

TransformOp TransformOp::from_file(const std::string& path, double tol) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("TransformOp: cannot open " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::vector<double> row;
    double v;
    while (ls >> v) row.push_back(v);
    if (!ls.eof()) throw std::invalid_argument("TransformOp: bad number in " + path);
    if (!row.empty()) rows.push_back(std::move(row));
  }
  if (rows.empty()) throw std::invalid_argument("TransformOp: empty matrix file " + path);
  const int p = static_cast<int>(rows.size());
  for (const auto& r : rows)
    if (static_cast<int>(r.size()) != p)
      throw std::invalid_argument("TransformOp: " + path + " is not square");
  Matrix z(p, p);
  for (int i = 0; i < p; ++i)
    for (int j = 0; j < p; ++j) z(i, j) = rows[i][j];
  return from_orthogonal(std::move(z), tol);
}

TransformOp TransformOp::named(const std::string& kind, int p) {
  if (kind == "identity") return identity(p);
  if (kind == "dct") return dct(p);
  if (kind == "dft" || kind == "fft")
    throw std::invalid_argument(
        "TransformOp: '" + kind +
        "' produces complex-valued transform slices and is not implemented; "
        "use a real orthogonal transform (identity, dct, or a matrix file)");
  throw std::invalid_argument("TransformOp: unknown transform kind '" + kind + "'");
}

TransformOp TransformOp::unchecked(Matrix z, Matrix z_inv, bool orthonormal) {
  TransformOp l;
  l.p = z.rows;
  l.z = std::move(z);
  l.z_inv = std::move(z_inv);
  l.orthonormal = orthonormal;
  return l;
}

Tensor3 l_forward(const Tensor3& t, const TransformOp& l) {
  if (t.n3 != l.p)
    throw std::invalid_argument("l_forward: tensor depth " + std::to_string(t.n3) +
                                " != transform size " + std::to_string(l.p));
  return mode_n_product(t, l.z, 3);
}

Tensor3 l_inverse(const Tensor3& t, const TransformOp& l) {
  if (t.n3 != l.p)
    throw std::invalid_argument("l_inverse: tensor depth " + std::to_string(t.n3) +
                                " != transform size " + std::to_string(l.p));
  return mode_n_product(t, l.z_inv, 3);
}

Tensor3 facewise_product(const Tensor3& a_hat, const Tensor3& b_hat) {
  if (a_hat.n2 != b_hat.n1)
    throw std::invalid_argument("facewise_product: inner dims " + std::to_string(a_hat.n2) +
                                " vs " + std::to_string(b_hat.n1));
  if (a_hat.n3 != b_hat.n3)
    throw std::invalid_argument("facewise_product: depth " + std::to_string(a_hat.n3) + " vs " +
                                std::to_string(b_hat.n3));
  Tensor3 out(a_hat.n1, b_hat.n2, a_hat.n3);
  for_each_slice(a_hat.n3, [&](int k) {
    const Matrix ak = frontal_slice(a_hat, k);
    const Matrix bk = frontal_slice(b_hat, k);
    Matrix ck(ak.rows, bk.cols);
    kern::gemm_nn(ak.a.data(), bk.a.data(), ck.a.data(), ak.rows, ak.cols, bk.cols);
    set_frontal_slice(out, k, ck);
  });
  return out;
}

Tensor3 l_product(const Tensor3& a, const Tensor3& b, const TransformOp& l) {
  if (a.n3 != l.p || b.n3 != l.p)
    throw std::invalid_argument("l_product: tensor depth must equal transform size");
  return l_inverse(facewise_product(l_forward(a, l), l_forward(b, l)), l);
}

Tensor3 l_transpose(const Tensor3& a, const TransformOp& l) {
  if (a.n3 != l.p)
    throw std::invalid_argument("l_transpose: tensor depth must equal transform size");
  Tensor3 out(a.n2, a.n1, a.n3);
  for (int i = 0; i < a.n1; ++i)
    for (int j = 0; j < a.n2; ++j)
      for (int k = 0; k < a.n3; ++k) out(j, i, k) = a(i, j, k);
  return out;
}

Tensor3 l_identity(int m, const TransformOp& l) {
  Tensor3 stack(m, m, l.p);
  for (int k = 0; k < l.p; ++k)
    for (int i = 0; i < m; ++i) stack(i, i, k) = 1.0;
  return l_inverse(stack, l);
}

namespace {
double slice_scale(const Matrix& s) {
  double m = 1.0;
  for (double v : s.a) m = std::max(m, std::fabs(v));
  return m;
}
}  // namespace

bool is_l_orthogonal(const Tensor3& q, const TransformOp& l, double tol) {
  if (q.n1 != q.n2) return false;
  const Tensor3 qh = l_forward(q, l);
  for (int k = 0; k < l.p; ++k) {
    const Matrix s = frontal_slice(qh, k);
    const double thr = tol * slice_scale(s);
    const Matrix sst = matmul(s, transpose(s));
    const Matrix sts = matmul(transpose(s), s);
    for (int i = 0; i < s.rows; ++i)
      for (int j = 0; j < s.cols; ++j) {
        const double id = (i == j) ? 1.0 : 0.0;
        if (std::fabs(sst(i, j) - id) > thr || std::fabs(sts(i, j) - id) > thr) return false;
      }
  }
  return true;
}

bool is_f_diagonal(const Tensor3& q, const TransformOp& l, double tol) {
  const Tensor3 qh = l_forward(q, l);
  for (int k = 0; k < l.p; ++k) {
    const Matrix s = frontal_slice(qh, k);
    const double thr = tol * slice_scale(s);
    for (int i = 0; i < s.rows; ++i)
      for (int j = 0; j < s.cols; ++j)
        if (i != j && std::fabs(s(i, j)) > thr) return false;
  }
  return true;
}

bool is_l_invertible(const Tensor3& q, const TransformOp& l, double tol) {
  if (q.n1 != q.n2) return false;
  const Tensor3 qh = l_forward(q, l);
  for (int k = 0; k < l.p; ++k) {
    const SvdResult svd = matrix_svd(frontal_slice(qh, k));
    if (svd.s.back() <= tol) return false;
  }
  return true;
}

}  // namespace ltt
