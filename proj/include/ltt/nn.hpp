#ifndef LTT_NN_HPP
#define LTT_NN_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "ltt/tensor.hpp"

namespace ltt {

// --- activations -----------------------------------------------------------

enum class Activation { Relu, Gelu };

Activation activation_from_name(const std::string& name);
const char* activation_name(Activation a);

double activate(double x, Activation a);       // tanh-approximation GELU
double activate_grad(double x, Activation a);  // d activate / dx
Tensor3 activate(const Tensor3& x, Activation a);

// --- softmax ---------------------------------------------------------------

// Row-wise softmax, stabilized by row-max subtraction. -inf entries (mask
// limit) get weight 0; a row that is entirely -inf has no unmasked entry and
// throws.
Matrix softmax_rows(const Matrix& s);
Tensor3 softmax_rows_slicewise(const Tensor3& s);

// --- positional encoding ----------------------------------------------------

// Slice-aware sinusoidal encoding with per-slice frequency scaling alpha_k,
// plus a fully learned table variant. Fixed-kind alphas (1-based k):
//   standard    alpha_k = 1
//   linear      alpha_k = k/p
//   exponential alpha_k = 2^((k-1)/(p-1)), alpha_1 = 1 when p = 1
//   harmonic    alpha_k = k
struct PEStrategy {
  enum class Kind { Standard, Linear, Exponential, Harmonic, Learnable };

  Kind kind = Kind::Standard;
  std::vector<double> alphas;  // fixed kinds only, length p
  Tensor3 learn_table;         // learnable kind only, T x d_s x p

  static PEStrategy standard(int p);
  static PEStrategy linear(int p);
  static PEStrategy exponential(int p);
  static PEStrategy harmonic(int p);
  // zero-mean uniform(+-0.02) init, seeded
  static PEStrategy learnable(int t_len, int d_s, int p, std::uint64_t seed);
  // fixed kinds by config name; "learnable" must go through learnable()
  static PEStrategy named(const std::string& name, int p);

  bool is_learnable() const { return kind == Kind::Learnable; }
  static const char* kind_name(Kind k);
};

std::vector<double> pe_alphas(PEStrategy::Kind kind, int p);

// P(t,j,k) with 1-based position value t+1 and the odd-j -> sin convention
// (j 1-based); the learnable kind returns its table.
Tensor3 positional_encoding(const PEStrategy& s, int t_len, int d_s, int p);

// --- layer norm --------------------------------------------------------------

struct LayerNormParams {
  Tensor3 gamma;  // 1 x d_s x p
  Tensor3 beta;   // 1 x d_s x p
  double eps = 1e-5;

  static LayerNormParams unit(int d_s, int p, double eps = 1e-5);
};

// Normalizes along mode-2 independently for every (t, k), then applies the
// per-slice affine parameters.
Tensor3 tensor_layernorm(const Tensor3& x, const LayerNormParams& p);

// --- embedding and classifier head ------------------------------------------

struct EmbeddingTable {
  int vocab = 0;
  int d = 0;
  Matrix weights;  // vocab x d

  static EmbeddingTable random_init(int vocab, int d, std::uint64_t seed);
};

Matrix embed(const std::vector<int>& tokens, const EmbeddingTable& e);

// Mean of the rows with mask != 0; throws if everything is masked out.
Matrix masked_mean_rows(const Matrix& z, const std::vector<std::uint8_t>& mask);

// masked mean-pool then affine map to class logits (w: d x classes)
std::vector<double> classify(const Matrix& z, const std::vector<std::uint8_t>& mask,
                             const Matrix& w, const std::vector<double>& b);

}  // namespace ltt

#endif
