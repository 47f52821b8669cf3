#ifndef LTT_REFERENCE_HPP
#define LTT_REFERENCE_HPP

#include <vector>

#include "ltt/nn.hpp"
#include "ltt/tensor.hpp"

// Plain-loop standard Transformer pieces at a given width. This is the
// independent second route for the equivalence checks: no shared gemm
// kernels, no slicing machinery, just the textbook formulas.
namespace ltt::ref {

struct AttentionWeights {
  std::vector<Matrix> wq, wk, wv;  // per head, width x d_h
  Matrix wo;                       // width x width
};

struct FfnWeights {
  Matrix w1;  // width x d_ff
  Matrix w2;  // d_ff x width
  std::vector<double> b1, b2;
};

Matrix attention(const Matrix& x, const AttentionWeights& w, int d_h,
                 const Matrix* mask = nullptr);
Matrix ffn(const Matrix& x, const FfnWeights& w, Activation act);
Matrix layernorm(const Matrix& x, const std::vector<double>& gamma,
                 const std::vector<double>& beta, double eps);

struct EncoderLayerWeights {
  AttentionWeights attn;
  FfnWeights ffn;
  std::vector<double> ln1_gamma, ln1_beta, ln2_gamma, ln2_beta;
  double eps = 1e-5;
};

Matrix encoder_layer(const Matrix& x, const EncoderLayerWeights& w, int d_h, Activation act);

}  // namespace ltt::ref

#endif
