#ifndef LTT_TENSOR_HPP
#define LTT_TENSOR_HPP

#include <cstdint>
#include <string>
#include <vector>

// Dense order-3 tensor and matrix values. All public operations are
// value-producing; results never alias their inputs. Indices are 0-based.
namespace ltt {

struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> a;  // row-major

  Matrix() = default;
  Matrix(int r, int c);                         // zero-filled
  Matrix(int r, int c, std::vector<double> v);  // takes ownership, checks finiteness

  double& operator()(int i, int j) { return a[static_cast<std::size_t>(i) * cols + j]; }
  double operator()(int i, int j) const { return a[static_cast<std::size_t>(i) * cols + j]; }
  const double* row(int i) const { return a.data() + static_cast<std::size_t>(i) * cols; }
  double* row(int i) { return a.data() + static_cast<std::size_t>(i) * cols; }
  std::size_t size() const { return a.size(); }

  static Matrix identity(int n);
};

// Layout: entry (i,j,k) lives at ((i*n2)+j)*n3 + k, so mode-3 tubes are
// contiguous and the L-transform is a single gemm over the tube matrix.
struct Tensor3 {
  int n1 = 0;
  int n2 = 0;
  int n3 = 0;
  std::vector<double> a;

  Tensor3() = default;
  Tensor3(int d1, int d2, int d3);                         // zero-filled
  Tensor3(int d1, int d2, int d3, std::vector<double> v);  // checks finiteness

  double& operator()(int i, int j, int k) {
    return a[(static_cast<std::size_t>(i) * n2 + j) * n3 + k];
  }
  double operator()(int i, int j, int k) const {
    return a[(static_cast<std::size_t>(i) * n2 + j) * n3 + k];
  }
  std::size_t size() const { return a.size(); }
  bool same_dims(const Tensor3& o) const { return n1 == o.n1 && n2 == o.n2 && n3 == o.n3; }
  std::string dims_str() const;
};

// --- slicing -------------------------------------------------------------

Matrix frontal_slice(const Tensor3& t, int k);  // t(:,:,k)
void set_frontal_slice(Tensor3& t, int k, const Matrix& s);

// --- unfolding / folding -------------------------------------------------

// Mode-n unfolding, n_n x (prod of the rest). Columns enumerate the
// remaining modes in ascending mode order, slowest-varying first:
//   mode 1 -> column j*n3 + k,  mode 2 -> i*n3 + k,  mode 3 -> i*n2 + j.
// fold(unfold(t, m), m, dims) == t bit-exactly.
Matrix unfold(const Tensor3& t, int mode);
Tensor3 fold(const Matrix& m, int mode, int n1, int n2, int n3);

// --- products ------------------------------------------------------------

// t x_n X: replaces dims[mode] with X.rows; requires X.cols == dims[mode].
Tensor3 mode_n_product(const Tensor3& t, const Matrix& x, int mode);

// --- matrix <-> tensor reshapes (feature-dimension split) -----------------

// Splits the d columns of X (T x d) into p contiguous blocks of width
// d_s = d/p: out(t,j,k) = X(t, k*d_s + j). Rejects p that does not divide d.
Tensor3 tensorize(const Matrix& x, int p);
// Exact inverse: concatenates the p frontal slices along the column axis.
Matrix matricize(const Tensor3& t);

// --- norms & elementwise -------------------------------------------------

double frobenius_norm(const Tensor3& t);
double frobenius_norm(const Matrix& m);

Tensor3 add(const Tensor3& x, const Tensor3& y);
Tensor3 sub(const Tensor3& x, const Tensor3& y);
Tensor3 scale(const Tensor3& x, double c);
Matrix add(const Matrix& x, const Matrix& y);
Matrix sub(const Matrix& x, const Matrix& y);
Matrix scale(const Matrix& x, double c);
Matrix matmul(const Matrix& x, const Matrix& y);
Matrix transpose(const Matrix& x);

double max_abs_diff(const Tensor3& x, const Tensor3& y);
double max_abs_diff(const Matrix& x, const Matrix& y);
// ||x - y||_F / max(||y||_F, tiny)
double rel_error(const Tensor3& x, const Tensor3& y);
double rel_error(const Matrix& x, const Matrix& y);

bool has_non_finite(const Tensor3& t);

// --- deterministic RNG ----------------------------------------------------

// xoshiro256++ seeded via splitmix64; identical streams on every platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);
  std::uint64_t next_u64();
  double uniform();                      // [0, 1)
  double uniform(double lo, double hi);  // [lo, hi)
  int uniform_int(int n);                // {0, ..., n-1}
  double normal();                       // standard normal (Box-Muller)

 private:
  std::uint64_t s_[4];
  bool have_spare_ = false;
  double spare_ = 0.0;
};

Tensor3 random_tensor(int n1, int n2, int n3, Rng& rng, double lo = -1.0, double hi = 1.0);
Matrix random_matrix(int r, int c, Rng& rng, double lo = -1.0, double hi = 1.0);

}  // namespace ltt

#endif
